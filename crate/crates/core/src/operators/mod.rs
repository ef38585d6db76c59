//! Covariance, inverse and square-root operators on finite periodic grids,
//! computed from spectra with the DFT.

mod matrix;

pub use matrix::matrix_inverse_row;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::covariance::periodic_coefficients;
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{GridSpec, SpectrumGrid};
use crate::spectral::{aliased_matern_sdf, LatticeSumConfig, MaternParams};
use crate::stencil::{Offset, StencilOperator};

/// Edge-to-centre coefficient ratio above which a grid is too small.
pub const EDGE_LIMIT: f64 = 1e-12;
/// Coefficients below this fraction of the centre are dropped from stencils.
pub const STORE_THRESHOLD: f64 = 1e-14;

/// Aliased Matérn spectrum at every DFT frequency of `g`.
pub fn grid_spectrum(p: &MaternParams, g: &GridSpec, cfg: &LatticeSumConfig) -> Result<SpectrumGrid> {
    p.validate()?;
    g.validate()?;
    if g.dim() != p.dim {
        return Err(Error::InvalidGrid(format!("grid has {} axes, parameters have d={}", g.dim(), p.dim)));
    }
    let [n1, n2] = g.shape2();
    // The aliased spectrum is even in each frequency coordinate, so one
    // quadrant determines the rest.
    let (h1, h2) = (n1 / 2 + 1, if n2 > 1 { n2 / 2 + 1 } else { 1 });
    let quadrant: Vec<f64> = (0..h1 * h2)
        .into_par_iter()
        .map(|q| {
            let idx = g.linear_index([q / h2, q % h2]);
            aliased_matern_sdf(&g.frequency(idx), p, g.delta, cfg)
        })
        .collect::<Result<_>>()?;
    let fold = |j: usize, n: usize| j.min(n - j);
    let values = (0..g.len())
        .map(|idx| {
            let [j1, j2] = g.multi_index(idx);
            let k2 = if n2 > 1 { fold(j2, n2) } else { 0 };
            quadrant[fold(j1, n1) * h2 + k2]
        })
        .collect();
    SpectrumGrid::new(g.clone(), values)
}

/// Coefficients of a translation-invariant operator on a periodic grid,
/// stored at periodic indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOperator {
    grid: GridSpec,
    coefs: Vec<f64>,
}

impl PeriodicOperator {
    /// Operator whose spectrum (in the `delta^d`-weighted convention) is `values`.
    pub fn from_spectrum_values(grid: &GridSpec, values: &[f64]) -> Self {
        PeriodicOperator {
            grid: grid.clone(),
            coefs: periodic_coefficients(grid, values),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    /// Coefficient at a signed offset, wrapped onto the torus.
    pub fn get(&self, h: Offset) -> f64 {
        let j1 = self.grid.wrap(0, h[0]);
        let j2 = if self.grid.dim() == 2 { self.grid.wrap(1, h[1]) } else { 0 };
        self.coefs[self.grid.linear_index([j1, j2])]
    }

    pub fn centre(&self) -> f64 {
        self.coefs[0]
    }

    /// `delta^d sum_h c[h] exp(-i 2 pi j.h / N)` at every grid frequency.
    pub fn spectrum(&self) -> Vec<f64> {
        let w = self.grid.delta.powi(self.grid.dim() as i32);
        fft::forward_real(&self.grid, &self.coefs)
            .into_iter()
            .map(|c| c.re * w)
            .collect()
    }

    /// Largest `|c[h]| / |c[0]|` with `|h|_inf` equal to a quarter of the grid.
    pub fn edge_ratio(&self) -> f64 {
        let quarter: Vec<i64> = self.grid.size.iter().map(|&n| (n / 4) as i64).collect();
        let centre = self.centre().abs();
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let j = self.grid.multi_index(idx);
            let mut on_shell = false;
            let mut inside = true;
            for axis in 0..self.grid.dim() {
                let h = self.grid.signed_offset(axis, j[axis]).abs();
                on_shell |= h == quarter[axis];
                inside &= h <= quarter[axis];
            }
            if on_shell && inside {
                worst = worst.max(self.coefs[idx].abs() / centre);
            }
        }
        worst
    }

    /// Fails with a grid-too-small error unless the coefficients have decayed
    /// below `EDGE_LIMIT` of the centre at a quarter of the grid.
    pub fn check_decay(&self) -> Result<()> {
        let ratio = self.edge_ratio();
        if !(ratio < EDGE_LIMIT) {
            return Err(Error::GridTooSmall { ratio, limit: EDGE_LIMIT });
        }
        Ok(())
    }

    /// Sparse symmetric stencil of offsets strictly inside the half-period,
    /// keeping entries above `STORE_THRESHOLD` of the centre.
    pub fn to_stencil(&self) -> Result<StencilOperator> {
        let dim = self.grid.dim();
        let centre = self.centre();
        let mut pairs = Vec::new();
        for idx in 0..self.grid.len() {
            let j = self.grid.multi_index(idx);
            let mut h = [0i64; 2];
            let mut interior = true;
            for axis in 0..dim {
                h[axis] = self.grid.signed_offset(axis, j[axis]);
                interior &= 2 * h[axis].unsigned_abs() < self.grid.size[axis] as u64;
            }
            if !interior {
                continue;
            }
            let v = 0.5 * (self.coefs[idx] + self.get([-h[0], -h[1]]));
            if h == [0, 0] || v.abs() > STORE_THRESHOLD * centre.abs() {
                pairs.push((h, v));
            }
        }
        StencilOperator::from_pairs(dim, pairs)
    }

    /// Periodic convolution `weight * sum_k self[h - k] other[k]`.
    pub fn convolve(&self, other: &PeriodicOperator, weight: f64) -> Result<PeriodicOperator> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("operators live on different grids".into()));
        }
        Ok(PeriodicOperator {
            grid: self.grid.clone(),
            coefs: circular_convolve(&self.grid, &self.coefs, &other.coefs, weight),
        })
    }

    /// Applies the operator to a field on the grid: `weight * sum_k c[j - k] x[k]`.
    pub fn apply(&self, field: &[f64], weight: f64) -> Result<Vec<f64>> {
        if field.len() != self.grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for a grid of {} points",
                field.len(),
                self.grid.len()
            )));
        }
        Ok(circular_convolve(&self.grid, &self.coefs, field, weight))
    }
}

fn circular_convolve(g: &GridSpec, a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    let fa = fft::forward_real(g, a);
    let mut prod: Vec<Complex64> = fft::forward_real(g, b).iter().zip(&fa).map(|(x, y)| x * y).collect();
    fft::transform(g, &mut prod, FftDirection::Inverse);
    let scale = weight / g.len() as f64;
    prod.into_iter().map(|c| c.re * scale).collect()
}

/// Covariance sequence `A[h]` of a grid spectrum.
pub fn covariance_sequence(spec: &SpectrumGrid) -> PeriodicOperator {
    PeriodicOperator::from_spectrum_values(&spec.grid, &spec.values)
}

/// Periodic inverse operator: spectrum `delta^(2d) / S`, so that
/// `sum_k A[h - k] inv[k] = 1[h]`.
pub fn inverse_periodic(spec: &SpectrumGrid) -> Result<PeriodicOperator> {
    let w2 = spec.grid.delta.powi(2 * spec.grid.dim() as i32);
    let values = reciprocal(spec, w2)?;
    Ok(PeriodicOperator::from_spectrum_values(&spec.grid, &values))
}

/// Periodic square-root operator: spectrum `sqrt(S)`, so that the
/// `delta^d`-weighted self-convolution reproduces `A`.
pub fn sqrt_periodic(spec: &SpectrumGrid) -> PeriodicOperator {
    let values: Vec<f64> = spec.values.iter().map(|v| v.sqrt()).collect();
    PeriodicOperator::from_spectrum_values(&spec.grid, &values)
}

/// Periodic inverse square-root operator: spectrum `delta^d / sqrt(S)`, so
/// that its `delta^d`-weighted convolution with the square root is `1[h]`.
pub fn inverse_sqrt_periodic(spec: &SpectrumGrid) -> Result<PeriodicOperator> {
    let w = spec.grid.delta.powi(spec.grid.dim() as i32);
    let values = reciprocal(&spec.map(f64::sqrt), w)?;
    Ok(PeriodicOperator::from_spectrum_values(&spec.grid, &values))
}

fn reciprocal(spec: &SpectrumGrid, numerator: f64) -> Result<Vec<f64>> {
    if !(spec.min() > 0.0) {
        return Err(Error::Domain("spectrum must be strictly positive to invert".into()));
    }
    Ok(spec.values.iter().map(|v| numerator / v).collect())
}

/// Inverse operator of the aliased Matérn covariance, read off a periodic
/// grid large enough for the coefficients to have decayed.
pub fn inverse_operator(p: &MaternParams, g: &GridSpec, cfg: &LatticeSumConfig) -> Result<StencilOperator> {
    let op = inverse_periodic(&grid_spectrum(p, g, cfg)?)?;
    op.check_decay()?;
    op.to_stencil()
}

/// Real symmetric square-root operator of the aliased Matérn covariance.
pub fn sqrt_operator(p: &MaternParams, g: &GridSpec, cfg: &LatticeSumConfig) -> Result<StencilOperator> {
    let op = sqrt_periodic(&grid_spectrum(p, g, cfg)?);
    op.check_decay()?;
    op.to_stencil()
}

/// Inverse square-root operator of the aliased Matérn covariance.
pub fn inverse_sqrt_operator(p: &MaternParams, g: &GridSpec, cfg: &LatticeSumConfig) -> Result<StencilOperator> {
    let op = inverse_sqrt_periodic(&grid_spectrum(p, g, cfg)?)?;
    op.check_decay()?;
    op.to_stencil()
}
