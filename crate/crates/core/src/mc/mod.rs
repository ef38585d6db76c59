//! Gaussian field simulation, decorrelation, maximum likelihood and the
//! parameter-bias simulation study.

mod likelihood;
mod optim;
mod study;

pub use likelihood::{neg_loglik, starting_values, LikelihoodSetup, Model, NegLogLik, Theta, PENALTY_BASE};
pub use optim::{nelder_mead, NelderMeadResult, NelderMeadSettings};
pub use study::{run_sim_study, GapStats, StudyConfig, StudyRow, StudySummary, StudyTable};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::{build_cov_matrix, CholeskyFactor, CovSource};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::operators::{grid_spectrum, inverse_sqrt_periodic, sqrt_periodic, PeriodicOperator};
use crate::spectral::{LatticeSumConfig, MaternParams};

/// How fields are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    /// Dense Cholesky factor of the open-grid covariance.
    Cholesky,
    /// Square-root operator convolution on the periodic grid.
    Convolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub params: MaternParams,
    pub tau2: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub method: SimMethod,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.params.validate()?;
        if self.grid.dim() != self.params.dim {
            return Err(Error::InvalidGrid("grid and parameter dimensions differ".into()));
        }
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return Err(Error::Domain(format!("tau2 must be nonnegative, got {}", self.tau2)));
        }
        if self.n_reps == 0 {
            return Err(Error::Domain("n_reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random stream for one replicate: ChaCha20 keyed by the master seed, with
/// the replicate index selecting the stream.
pub fn replicate_rng(seed: u64, rep_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

enum Engine {
    Cholesky(CholeskyFactor),
    Convolution(PeriodicOperator),
}

/// Reusable simulator: factors or transforms once, then draws replicates.
pub struct Simulator {
    cfg: SimConfig,
    engine: Engine,
}

impl Simulator {
    pub fn new(cfg: &SimConfig, lattice: &LatticeSumConfig) -> Result<Self> {
        cfg.validate()?;
        let engine = match cfg.method {
            SimMethod::Cholesky => {
                let m = build_cov_matrix(&cfg.grid, CovSource::Matern(&cfg.params), 0.0)?;
                Engine::Cholesky(m.cholesky()?)
            }
            SimMethod::Convolution => Engine::Convolution(sqrt_periodic(&grid_spectrum(&cfg.params, &cfg.grid, lattice)?)),
        };
        Ok(Simulator { cfg: cfg.clone(), engine })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Field for replicate `rep_index`. The signal is drawn first and the
    /// nugget noise second, so the signal does not depend on `tau2`.
    pub fn field(&self, rep_index: u64) -> Result<Vec<f64>> {
        let n = self.cfg.grid.len();
        let mut rng = replicate_rng(self.cfg.seed, rep_index);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut y = match &self.engine {
            Engine::Cholesky(f) => f.mul_lower(&z),
            Engine::Convolution(s) => {
                let w = self.cfg.grid.delta.powf(self.cfg.grid.dim() as f64 / 2.0);
                s.apply(&z, w)?
            }
        };
        if self.cfg.tau2 > 0.0 {
            let sd = (self.cfg.params.sigma2 * self.cfg.tau2).sqrt();
            for v in &mut y {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += sd * e;
            }
        }
        Ok(y)
    }
}

/// One replicate of a simulated field. Builds the simulator each call; use
/// [`Simulator`] to draw many replicates.
pub fn simulate_field(cfg: &SimConfig, rep_index: u64) -> Result<Vec<f64>> {
    Simulator::new(cfg, &LatticeSumConfig::for_dim(cfg.params.dim))?.field(rep_index)
}

/// Applies the inverse square-root operator to a periodic field, giving
/// white noise when the field has covariance `p` on `g`.
pub fn decorrelate(field: &[f64], p: &MaternParams, g: &GridSpec, lattice: &LatticeSumConfig) -> Result<Vec<f64>> {
    let r = inverse_sqrt_periodic(&grid_spectrum(p, g, lattice)?)?;
    r.apply(field, g.delta.powf(g.dim() as f64 / 2.0))
}

/// Maximum-likelihood estimates for one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub sigma2_hat: f64,
    pub alpha_hat: f64,
    pub tau2_hat: f64,
    pub loglik: f64,
    /// `sigma2_hat * alpha_hat^2`.
    pub micro: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes the likelihood over log-parameters with Nelder–Mead. `tau2`
/// is estimated only when `setup.estimate_tau2` is set.
pub fn fit_mle(data: &[f64], setup: &LikelihoodSetup, init: Option<Theta>) -> Result<FitResult> {
    setup.validate()?;
    if data.len() != setup.grid.len() {
        return Err(Error::InvalidGrid(format!(
            "data has {} values for a grid of {} points",
            data.len(),
            setup.grid.len()
        )));
    }
    let init = init.unwrap_or_else(|| starting_values(data, setup));
    let mut x0 = vec![init.sigma2.ln(), init.alpha.ln()];
    if setup.estimate_tau2 {
        x0.push(init.tau2.ln());
    }
    let ctx = likelihood::Workspace::new(setup)?;
    let mut failure = None;
    let objective = |x: &[f64]| {
        let theta = setup.theta_from_log(x);
        match ctx.neg_loglik(data, &theta) {
            Ok(v) => v.value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let nm = nelder_mead(objective, &x0, &NelderMeadSettings::default());
    if let Some(e) = failure {
        return Err(e);
    }
    let theta = setup.theta_from_log(&nm.x);
    let penalized = ctx.neg_loglik(data, &theta)?.penalized;
    Ok(FitResult {
        model: setup.model,
        sigma2_hat: theta.sigma2,
        alpha_hat: theta.alpha,
        tau2_hat: theta.tau2,
        loglik: -nm.value,
        micro: theta.sigma2 * theta.alpha * theta.alpha,
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: nm.converged && !penalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: SimMethod, tau2: f64) -> SimConfig {
        SimConfig {
            grid: GridSpec::d1(1.0, 64).unwrap(),
            params: MaternParams::new(1.5, 0.5, 0.5, 1).unwrap(),
            tau2,
            n_reps: 1,
            seed: 7,
            method,
        }
    }

    #[test]
    fn deterministic_per_replicate() {
        let c = cfg(SimMethod::Cholesky, 0.1);
        let sim = Simulator::new(&c, &LatticeSumConfig::for_dim(1)).unwrap();
        let a = sim.field(3).unwrap();
        let b = simulate_field(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sim.field(4).unwrap());
    }

    #[test]
    fn signal_shared_across_noise_levels() {
        let lat = LatticeSumConfig::for_dim(1);
        let quiet = Simulator::new(&cfg(SimMethod::Convolution, 0.0), &lat).unwrap().field(1).unwrap();
        let noisy = Simulator::new(&cfg(SimMethod::Convolution, 0.1), &lat).unwrap().field(1).unwrap();
        let diff: f64 = quiet.iter().zip(&noisy).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 64.0;
        // Residual variance is the nugget sigma2 * tau2 = 0.15.
        assert!(diff > 0.05 && diff < 0.3, "{diff}");
    }

    #[test]
    fn decorrelate_inverts_convolution() {
        let c = cfg(SimMethod::Convolution, 0.0);
        let lat = LatticeSumConfig::for_dim(1);
        let sim = Simulator::new(&c, &lat).unwrap();
        let y = sim.field(0).unwrap();
        let w = decorrelate(&y, &c.params, &c.grid, &lat).unwrap();
        let mut rng = replicate_rng(c.seed, 0);
        for v in &w {
            let z: f64 = StandardNormal.sample(&mut rng);
            assert!((v - z).abs() < 1e-9);
        }
    }
}
