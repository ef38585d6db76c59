use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::{LikelihoodSetup, Model};
use super::{fit_mle, SimConfig, SimMethod, Simulator};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::{LatticeSumConfig, MaternParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub grid: GridSpec,
    pub params: MaternParams,
    pub noise_levels: Vec<f64>,
    pub models: Vec<Model>,
    pub n_reps: usize,
    pub seed: u64,
    /// Periodic embedding size for the SPDE models; `None` uses the default.
    pub embed: Option<Vec<usize>>,
}

impl StudyConfig {
    /// `sigma2 = 2`, `alpha = 0.2`, `nu = 1` on an `n x n` unit grid.
    pub fn standard(n: usize, n_reps: usize, noise_levels: Vec<f64>, seed: u64) -> Result<Self> {
        Ok(StudyConfig {
            grid: GridSpec::d2(1.0, n, n)?,
            params: MaternParams::new(2.0, 0.2, 1.0, 2)?,
            noise_levels,
            models: Model::ALL.to_vec(),
            n_reps,
            seed,
            embed: None,
        })
    }

    fn setup(&self, model: Model, noise: f64) -> LikelihoodSetup {
        let mut s = LikelihoodSetup::new(self.grid.clone(), self.params.nu, model, noise > 0.0);
        if let Some(e) = &self.embed {
            s.embed = e.clone();
        }
        s
    }
}

/// One fitted replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub noise_level: f64,
    pub model: Model,
    pub rep: usize,
    pub sigma2_hat: f64,
    pub alpha_hat: f64,
    pub tau2_hat: f64,
    pub micro: f64,
    pub loglik: f64,
    pub converged: bool,
}

/// Per (noise level, model) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub noise_level: f64,
    pub model: Model,
    pub median_micro: f64,
    pub n_converged: usize,
    pub n_failed: usize,
    /// Finite micro estimates in increasing order.
    pub sorted_micro: Vec<f64>,
}

/// Difference of medians with its paired bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub gap: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<StudySummary>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

impl StudyTable {
    pub fn summary(&self, noise_level: f64, model: Model) -> Option<&StudySummary> {
        self.summaries
            .iter()
            .find(|s| s.noise_level == noise_level && s.model == model)
    }

    fn micro_by_rep(&self, noise_level: f64, model: Model) -> Vec<f64> {
        let mut v = vec![f64::NAN; self.config.n_reps];
        for r in &self.rows {
            if r.noise_level == noise_level && r.model == model {
                v[r.rep] = r.micro;
            }
        }
        v
    }

    /// `median(a) - median(b)` at one noise level, with a bootstrap standard
    /// error that resamples replicates jointly for both models.
    pub fn gap(&self, noise_level: f64, a: Model, b: Model, n_boot: usize, seed: u64) -> GapStats {
        let (ma, mb) = (self.micro_by_rep(noise_level, a), self.micro_by_rep(noise_level, b));
        let pairs: Vec<(f64, f64)> = ma
            .into_iter()
            .zip(mb)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let gap_of = |idx: &mut dyn Iterator<Item = usize>| {
            let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = idx.map(|i| pairs[i]).unzip();
            median(&mut xs) - median(&mut ys)
        };
        let gap = gap_of(&mut (0..pairs.len()));
        if pairs.len() < 2 || n_boot < 2 {
            return GapStats { gap, se: f64::NAN };
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..n_boot)
            .map(|_| {
                let idx: Vec<usize> = (0..pairs.len()).map(|_| rng.random_range(0..pairs.len())).collect();
                gap_of(&mut idx.into_iter())
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n_boot as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_boot - 1) as f64;
        GapStats { gap, se: var.sqrt() }
    }
}

/// Simulates `n_reps` fields per noise level from the true Matérn model and
/// fits every model to each. Replicates run in parallel; the same replicate
/// index gives the same signal at every noise level and the same data for
/// every model. Fitting failures are recorded, not propagated.
pub fn run_sim_study(cfg: &StudyConfig) -> Result<StudyTable> {
    if cfg.noise_levels.is_empty() || cfg.models.is_empty() {
        return Err(Error::Domain("study needs at least one noise level and one model".into()));
    }
    let lattice = LatticeSumConfig::for_dim(cfg.params.dim);
    let simulators = cfg
        .noise_levels
        .iter()
        .map(|&tau2| {
            Simulator::new(
                &SimConfig {
                    grid: cfg.grid.clone(),
                    params: cfg.params,
                    tau2,
                    n_reps: cfg.n_reps,
                    seed: cfg.seed,
                    method: SimMethod::Cholesky,
                },
                &lattice,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for &m in &cfg.models {
        cfg.setup(m, 0.0).validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.noise_levels.len())
        .flat_map(|l| (0..cfg.n_reps).map(move |r| (l, r)))
        .collect();
    let results: Vec<Vec<(usize, usize, StudyRow)>> = jobs
        .par_iter()
        .map(|&(l, rep)| {
            let noise = cfg.noise_levels[l];
            let data = simulators[l].field(rep as u64);
            cfg.models
                .iter()
                .enumerate()
                .map(|(mi, &model)| {
                    let fit = data.as_ref().map_err(Clone::clone).and_then(|d| fit_mle(d, &cfg.setup(model, noise), None));
                    let row = match fit {
                        Ok(f) => StudyRow {
                            noise_level: noise,
                            model,
                            rep,
                            sigma2_hat: f.sigma2_hat,
                            alpha_hat: f.alpha_hat,
                            tau2_hat: f.tau2_hat,
                            micro: f.micro,
                            loglik: f.loglik,
                            converged: f.converged,
                        },
                        Err(_) => StudyRow {
                            noise_level: noise,
                            model,
                            rep,
                            sigma2_hat: f64::NAN,
                            alpha_hat: f64::NAN,
                            tau2_hat: f64::NAN,
                            micro: f64::NAN,
                            loglik: f64::NAN,
                            converged: false,
                        },
                    };
                    (l, mi, row)
                })
                .collect()
        })
        .collect();
    let mut keyed: Vec<(usize, usize, StudyRow)> = results.into_iter().flatten().collect();
    keyed.sort_by_key(|(l, m, r)| (*l, *m, r.rep));

    let mut summaries = Vec::new();
    for &noise in &cfg.noise_levels {
        for &model in &cfg.models {
            let sel: Vec<&StudyRow> = keyed
                .iter()
                .map(|(_, _, r)| r)
                .filter(|r| r.noise_level == noise && r.model == model)
                .collect();
            let mut micro: Vec<f64> = sel.iter().map(|r| r.micro).filter(|m| m.is_finite()).collect();
            let median_micro = median(&mut micro);
            summaries.push(StudySummary {
                noise_level: noise,
                model,
                median_micro,
                n_converged: sel.iter().filter(|r| r.converged).count(),
                n_failed: sel.iter().filter(|r| !r.micro.is_finite()).count(),
                sorted_micro: micro,
            });
        }
    }
    Ok(StudyTable {
        config: cfg.clone(),
        rows: keyed.into_iter().map(|(_, _, r)| r).collect(),
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn tiny_study_bookkeeping() {
        let mut cfg = StudyConfig::standard(6, 3, vec![0.0, 0.1], 11).unwrap();
        cfg.embed = Some(vec![24, 24]);
        let t = run_sim_study(&cfg).unwrap();
        assert_eq!(t.rows.len(), 3 * 3 * 2);
        assert_eq!(t.summaries.len(), 6);
        let again = run_sim_study(&cfg).unwrap();
        assert_eq!(t, again);
        let g = t.gap(0.0, Model::TrueMatern, Model::Spde, 50, 1);
        assert!(g.gap.is_finite() && g.se.is_finite());
    }
}
