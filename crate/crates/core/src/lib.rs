//! Aliased Matérn spectra on regular lattices, the grid operators they
//! induce, SPDE precision approximations and tools to measure how far the
//! two disagree.

pub mod covariance;
pub mod error;
pub mod fft;
pub mod grid;
pub mod mc;
pub mod operators;
pub mod spectral;
pub mod stencil;
pub mod theorems;

pub use covariance::{bessel_k, build_cov_matrix, matern_cov, CovMatrix, CovSource, LagTable};
pub use error::{Error, Result};
pub use grid::{GridSpec, SpectrumGrid};
pub use mc::{fit_mle, neg_loglik, run_sim_study, simulate_field, decorrelate, FitResult, Model, SimConfig, SimMethod, Theta};
pub use operators::{grid_spectrum, inverse_operator, matrix_inverse_row, sqrt_operator, PeriodicOperator};
pub use spectral::{
    aliased_matern_sdf, exp1d_aliased_closed, matern_sdf, spde_sdf, spde_stencil, stencil_sdf, Frequency,
    LatticeSumConfig, MaternParams, SpdeCase,
};
pub use stencil::{convolve, Offset, StencilOperator};
pub use theorems::{fit_expansion, lattice_constant, spde_ratio_grid, ExpansionReport, LatticeKind};
