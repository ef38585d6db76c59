use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::covariance::{build_cov_matrix, periodic_coefficients, CovSource, LagTable};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::{spde_sdf_from_laplacian, MaternParams, SpdeCase};

/// Covariance model used in a likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    TrueMatern,
    Spde,
    SpdeDouble,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::TrueMatern, Model::Spde, Model::SpdeDouble];

    pub fn name(self) -> &'static str {
        match self {
            Model::TrueMatern => "true_matern",
            Model::Spde => "spde",
            Model::SpdeDouble => "spde_double",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown model '{s}'")))
    }
}

/// Covariance parameters `(sigma2, alpha, tau2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub sigma2: f64,
    pub alpha: f64,
    pub tau2: f64,
}

/// Everything fixed across likelihood evaluations for one data grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSetup {
    pub grid: GridSpec,
    pub nu: f64,
    pub model: Model,
    pub estimate_tau2: bool,
    /// Nugget ratio used when it is not estimated.
    pub fixed_tau2: f64,
    /// Periodic embedding size at the data spacing; doubled (at half the
    /// spacing) for `SpdeDouble`.
    pub embed: Vec<usize>,
}

/// Objective value assigned to parameters with no valid covariance, before
/// adding the distance term.
pub const PENALTY_BASE: f64 = 1e10;

impl LikelihoodSetup {
    /// Setup with the default embedding: at least 100 points and three
    /// times the data size along each axis.
    pub fn new(grid: GridSpec, nu: f64, model: Model, estimate_tau2: bool) -> Self {
        let embed = grid.size.iter().map(|&n| (3 * n).max(100)).collect();
        LikelihoodSetup {
            grid,
            nu,
            model,
            estimate_tau2,
            fixed_tau2: 0.0,
            embed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::Domain(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.fixed_tau2.is_finite() && self.fixed_tau2 >= 0.0) {
            return Err(Error::Domain("fixed tau2 must be nonnegative".into()));
        }
        if self.model != Model::TrueMatern {
            SpdeCase::for_matern(self.nu, self.grid.dim())?;
            if self.embed.len() != self.grid.dim() || self.embed.iter().zip(&self.grid.size).any(|(e, n)| e <= n) {
                return Err(Error::InvalidGrid(format!(
                    "embedding {:?} must exceed data grid {:?}",
                    self.embed, self.grid.size
                )));
            }
        }
        Ok(())
    }

    /// Parameters from a vector of logs `(ln sigma2, ln alpha[, ln tau2])`.
    pub fn theta_from_log(&self, x: &[f64]) -> Theta {
        Theta {
            sigma2: x[0].exp(),
            alpha: x[1].exp(),
            tau2: if self.estimate_tau2 { x[2].exp() } else { self.fixed_tau2 },
        }
    }

    fn log_params(&self, theta: &Theta) -> Vec<f64> {
        let mut v = vec![theta.sigma2.ln(), theta.alpha.ln()];
        if self.estimate_tau2 {
            v.push(theta.tau2.ln());
        }
        v
    }
}

/// Negative log-likelihood; `penalized` marks parameters without a valid
/// positive-definite covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegLogLik {
    pub value: f64,
    pub penalized: bool,
}

/// Precomputed periodic embedding for the SPDE likelihoods.
struct Embedding {
    grid: GridSpec,
    case: SpdeCase,
    /// Discrete Laplacian symbol at each embedding frequency.
    laplacian: Vec<f64>,
    ratio: usize,
}

impl Embedding {
    fn new(setup: &LikelihoodSetup) -> Result<Self> {
        let ratio = if setup.model == Model::SpdeDouble { 2 } else { 1 };
        let size: Vec<usize> = setup.embed.iter().map(|e| e * ratio).collect();
        let grid = GridSpec::new(setup.grid.delta / ratio as f64, size)?;
        let case = SpdeCase::for_matern(setup.nu, setup.grid.dim())?;
        let laplacian = (0..grid.len())
            .map(|idx| {
                let j = grid.multi_index(idx);
                (0..grid.dim())
                    .map(|axis| 4.0 * (PI * j[axis] as f64 / grid.size[axis] as f64).sin().powi(2))
                    .sum()
            })
            .collect();
        Ok(Embedding {
            grid,
            case,
            laplacian,
            ratio,
        })
    }

    /// Unit-variance SPDE covariances on the data lags.
    fn lags(&self, data: &GridSpec, alpha: f64) -> Result<LagTable> {
        let spectrum: Vec<f64> = self
            .laplacian
            .iter()
            .map(|&l| spde_sdf_from_laplacian(self.case, l, alpha, self.grid.delta))
            .collect();
        let cov = periodic_coefficients(&self.grid, &spectrum);
        LagTable::from_fn(data.shape2(), |[i, j]| {
            Ok(cov[self.grid.linear_index([i * self.ratio, j * self.ratio])])
        })
    }
}

/// Reusable state for repeated likelihood evaluations.
pub(crate) struct Workspace<'a> {
    setup: &'a LikelihoodSetup,
    embedding: Option<Embedding>,
}

impl<'a> Workspace<'a> {
    pub(crate) fn new(setup: &'a LikelihoodSetup) -> Result<Self> {
        setup.validate()?;
        let embedding = match setup.model {
            Model::TrueMatern => None,
            Model::Spde | Model::SpdeDouble => Some(Embedding::new(setup)?),
        };
        Ok(Workspace { setup, embedding })
    }

    pub(crate) fn neg_loglik(&self, data: &[f64], theta: &Theta) -> Result<NegLogLik> {
        let setup = self.setup;
        if data.len() != setup.grid.len() {
            return Err(Error::InvalidGrid(format!(
                "data has {} values for a grid of {} points",
                data.len(),
                setup.grid.len()
            )));
        }
        let penalty = || {
            let dist = setup
                .log_params(theta)
                .iter()
                .map(|v| if v.is_finite() { v * v } else { 1e6 })
                .sum::<f64>()
                .sqrt();
            NegLogLik {
                value: PENALTY_BASE + dist,
                penalized: true,
            }
        };
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !(valid(theta.sigma2) && valid(theta.alpha) && theta.tau2.is_finite() && theta.tau2 >= 0.0) {
            return Ok(penalty());
        }
        let cov = match &self.embedding {
            None => {
                let p = MaternParams::new(theta.sigma2, theta.alpha, setup.nu, setup.grid.dim())?;
                build_cov_matrix(&setup.grid, CovSource::Matern(&p), theta.tau2)?
            }
            Some(emb) => {
                let table = emb.lags(&setup.grid, theta.alpha)?;
                if !table.variance().is_finite() || table.variance() <= 0.0 {
                    return Ok(penalty());
                }
                build_cov_matrix(
                    &setup.grid,
                    CovSource::Lags {
                        table: &table,
                        sigma2: theta.sigma2,
                    },
                    theta.tau2,
                )?
            }
        };
        let factor = match cov.cholesky() {
            Ok(f) => f,
            Err(_) => return Ok(penalty()),
        };
        let n = data.len() as f64;
        let value = 0.5 * (n * (2.0 * PI).ln() + factor.log_det() + factor.quad_form(data));
        if !value.is_finite() {
            return Ok(penalty());
        }
        Ok(NegLogLik {
            value,
            penalized: false,
        })
    }
}

/// Exact Gaussian negative log-likelihood of mean-zero `data`.
pub fn neg_loglik(data: &[f64], setup: &LikelihoodSetup, theta: &Theta) -> Result<NegLogLik> {
    Workspace::new(setup)?.neg_loglik(data, theta)
}

/// Default optimizer start: sample variance, `alpha = 2 / extent` with the
/// largest grid extent, and `tau2 = 0.01` when estimated.
pub fn starting_values(data: &[f64], setup: &LikelihoodSetup) -> Theta {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let extent = setup
        .grid
        .size
        .iter()
        .map(|&s| s as f64 * setup.grid.delta)
        .fold(0.0, f64::max);
    Theta {
        sigma2: if var > 0.0 { var } else { 1.0 },
        alpha: 2.0 / extent,
        tau2: if setup.estimate_tau2 { 0.01 } else { setup.fixed_tau2 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::spde_cov_periodic_unchecked;
    use crate::spectral::{spde_sdf, Frequency};

    #[test]
    fn laplacian_form_matches_spectrum() {
        let g = GridSpec::d2(0.5, 8, 8).unwrap();
        for idx in 0..g.len() {
            let f: Frequency = g.frequency(idx);
            let lap: f64 = f.as_slice().iter().map(|w| 4.0 * (PI * w * 0.5).sin().powi(2)).sum();
            let a = spde_sdf(SpdeCase::D2Nu1, &f, 0.3, 0.5).unwrap();
            assert!((spde_sdf_from_laplacian(SpdeCase::D2Nu1, lap, 0.3, 0.5) - a).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn embedding_matches_periodic_covariance() {
        let data = GridSpec::d2(1.0, 6, 6).unwrap();
        for model in [Model::Spde, Model::SpdeDouble] {
            let mut setup = LikelihoodSetup::new(data.clone(), 1.0, model, false);
            setup.embed = vec![40, 40];
            let emb = Embedding::new(&setup).unwrap();
            let table = emb.lags(&data, 0.4).unwrap();
            let r = emb.ratio;
            let g_embed = GridSpec::d2(1.0 / r as f64, 40 * r, 40 * r).unwrap();
            let reference = spde_cov_periodic_unchecked(&g_embed, &data, SpdeCase::D2Nu1, 0.4).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    assert!((table.get([i, j]) - reference.lags.get([i, j])).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn invalid_parameters_are_penalized_above_valid_values() {
        let g = GridSpec::d1(1.0, 8).unwrap();
        let setup = LikelihoodSetup::new(g, 0.5, Model::TrueMatern, false);
        let data = [0.1, -0.3, 0.2, 0.5, 0.4, -0.1, 0.0, 0.3];
        let bad = neg_loglik(&data, &setup, &Theta { sigma2: -1.0, alpha: 1.0, tau2: 0.0 }).unwrap();
        assert!(bad.penalized && bad.value.is_finite());
        let good = neg_loglik(&data, &setup, &Theta { sigma2: 1e-6, alpha: 50.0, tau2: 0.0 }).unwrap();
        assert!(!good.penalized && good.value < bad.value);
    }
}
