//! Small-`alpha delta` expansions of the true aliased and SPDE spectra at
//! the zero and Nyquist frequencies, and the lattice constants behind them.

use std::f64::consts::PI;
use std::fmt;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpectrumGrid};
use crate::spectral::{aliasing_sum, matern_sdf, spde_sdf, Frequency, LatticeSumConfig, MaternParams, SpdeCase};

/// Relative tolerance used for every lattice sum in this module.
pub const LATTICE_TOL: f64 = 1e-13;

fn lattice_cfg(dim: usize) -> LatticeSumConfig {
    LatticeSumConfig::for_dim(dim).with_rel_tol(LATTICE_TOL)
}

/// Named lattice sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// `sum_{k != 0} |k|^(-4)` over `Z^2`; constant `16 pi^4 / sum`.
    Full2d,
    /// `sum_k ((2k1+1)^2 + (2k2)^2)^(-2)`; constant `pi^4 / sum`.
    AxisHalf2d,
    /// `sum_k ((2k1+1)^2 + (2k2+1)^2)^(-2)`; constant `pi^4 / sum`.
    CornerHalf2d,
    /// `sum_{k != 0} |k|^(-6)` over `Z^2`; constant `32 pi^6 / sum`.
    Full2dNext,
    /// `sum_k ((2k1+1)^2 + (2k2)^2)^(-3)`; constant `pi^4 / (2 sum)`.
    AxisHalf2dNext,
    /// `sum_k ((2k1+1)^2 + (2k2+1)^2)^(-3)`; constant `pi^4 / (2 sum)`.
    CornerHalf2dNext,
    /// `sum_{k != 0} k^(-4)` over `Z`.
    Full1dP2,
    /// `sum_{k >= 0} (2k+1)^(-2)`.
    Odd1dP1,
    /// `sum_{k >= 0} (2k+1)^(-4)`.
    Odd1dP2,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 9] = [
        LatticeKind::Full2d,
        LatticeKind::AxisHalf2d,
        LatticeKind::CornerHalf2d,
        LatticeKind::Full2dNext,
        LatticeKind::AxisHalf2dNext,
        LatticeKind::CornerHalf2dNext,
        LatticeKind::Full1dP2,
        LatticeKind::Odd1dP1,
        LatticeKind::Odd1dP2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Full2d => "full_2d",
            LatticeKind::AxisHalf2d => "axis_half_2d",
            LatticeKind::CornerHalf2d => "corner_half_2d",
            LatticeKind::Full2dNext => "full_2d_next",
            LatticeKind::AxisHalf2dNext => "axis_half_2d_next",
            LatticeKind::CornerHalf2dNext => "corner_half_2d_next",
            LatticeKind::Full1dP2 => "full_1d_p2",
            LatticeKind::Odd1dP1 => "odd_1d_p1",
            LatticeKind::Odd1dP2 => "odd_1d_p2",
        }
    }

    /// Published value of the normalized constant, where one exists.
    pub fn published(self) -> Option<f64> {
        match self {
            LatticeKind::Full2d => Some(258.602),
            LatticeKind::AxisHalf2d => Some(43.1003),
            LatticeKind::CornerHalf2d => Some(86.2007),
            LatticeKind::Full2dNext => Some(6603.35),
            LatticeKind::AxisHalf2dNext => Some(23.8950),
            LatticeKind::CornerHalf2dNext => Some(95.5799),
            _ => None,
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value of the defining lattice sum.
pub fn lattice_sum(kind: LatticeKind) -> Result<f64> {
    let cfg2 = lattice_cfg(2);
    let cfg1 = lattice_cfg(1);
    // (c + |y + k|^2)^(-s) with c = 0 via the planar/line sums; half-integer
    // shifts give the odd lattices after a factor of 2^(2s).
    let plane = |y: [f64; 2], s: f64, skip: bool| crate::spectral::lattice_plane(y, 0.0, s, skip, &cfg2);
    Ok(match kind {
        LatticeKind::Full2d => plane([0.0, 0.0], 2.0, true)?,
        LatticeKind::AxisHalf2d => plane([0.5, 0.0], 2.0, false)? / 16.0,
        LatticeKind::CornerHalf2d => plane([0.5, 0.5], 2.0, false)? / 16.0,
        LatticeKind::Full2dNext => plane([0.0, 0.0], 3.0, true)?,
        LatticeKind::AxisHalf2dNext => plane([0.5, 0.0], 3.0, false)? / 64.0,
        LatticeKind::CornerHalf2dNext => plane([0.5, 0.5], 3.0, false)? / 64.0,
        LatticeKind::Full1dP2 => crate::spectral::lattice_line(0.0, 0.0, 2.0, true, &cfg1)?,
        LatticeKind::Odd1dP1 => crate::spectral::lattice_line(0.5, 0.0, 1.0, false, &cfg1)? / 8.0,
        LatticeKind::Odd1dP2 => crate::spectral::lattice_line(0.5, 0.0, 2.0, false, &cfg1)? / 32.0,
    })
}

/// Normalized constant: the 2D kinds return the published normalization,
/// the 1D kinds return the sum itself.
pub fn lattice_constant(kind: LatticeKind) -> Result<f64> {
    let sum = lattice_sum(kind)?;
    let pi4 = PI.powi(4);
    Ok(match kind {
        LatticeKind::Full2d => 16.0 * pi4 / sum,
        LatticeKind::AxisHalf2d | LatticeKind::CornerHalf2d => pi4 / sum,
        LatticeKind::Full2dNext => 32.0 * PI.powi(6) / sum,
        LatticeKind::AxisHalf2dNext | LatticeKind::CornerHalf2dNext => pi4 / (2.0 * sum),
        LatticeKind::Full1dP2 | LatticeKind::Odd1dP1 | LatticeKind::Odd1dP2 => sum,
    })
}

/// Which spectrum is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    True,
    Spde,
}

/// Frequency at which the expansion is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyLabel {
    Zero,
    NyquistAxis,
    NyquistCorner,
}

impl FrequencyLabel {
    fn phase(self) -> [f64; 2] {
        match self {
            FrequencyLabel::Zero => [0.0, 0.0],
            FrequencyLabel::NyquistAxis => [0.5, 0.0],
            FrequencyLabel::NyquistCorner => [0.5, 0.5],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrequencyLabel::Zero => "zero",
            FrequencyLabel::NyquistAxis => "nyquist_axis",
            FrequencyLabel::NyquistCorner => "nyquist_corner",
        }
    }
}

/// One expansion to verify: a model, an SPDE case (fixing `nu` and `d`) and
/// a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpansionCase {
    pub model: SpectrumModel,
    pub case: SpdeCase,
    pub frequency: FrequencyLabel,
}

/// Published leading and next-order coefficients of an expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedTerms {
    /// Power of `alpha delta` of the leading term of the deviation.
    pub power: i32,
    pub leading: f64,
    pub next: Option<f64>,
}

impl ExpansionCase {
    /// Every case with a published expansion.
    pub fn all() -> Vec<ExpansionCase> {
        use FrequencyLabel::*;
        use SpectrumModel::*;
        let mut out = Vec::new();
        for case in SpdeCase::ALL {
            let freqs: &[FrequencyLabel] = if case.dim() == 1 {
                &[Zero, NyquistAxis]
            } else {
                &[Zero, NyquistAxis, NyquistCorner]
            };
            for model in [True, Spde] {
                for &frequency in freqs {
                    out.push(ExpansionCase { model, case, frequency });
                }
            }
        }
        out
    }

    pub fn id(&self) -> String {
        let m = match self.model {
            SpectrumModel::True => "true",
            SpectrumModel::Spde => "spde",
        };
        format!("{m}_{}_{}", self.case.name(), self.frequency.name())
    }

    /// Coefficients as printed in the published expansions. At zero
    /// frequency these describe the deviation from 1; a zero deviation
    /// stands for an exact identity.
    pub fn published(&self) -> PublishedTerms {
        use FrequencyLabel::*;
        use SpdeCase::*;
        use SpectrumModel::*;
        let t = |power, leading, next| PublishedTerms { power, leading, next };
        match (self.model, self.case, self.frequency) {
            (True, D1NuHalf, Zero) => t(2, 1.0 / 12.0, Some(-1.0 / 720.0)),
            (True, D1NuHalf, _) => t(2, 0.25, Some(-1.0 / 48.0)),
            (Spde, D1NuHalf, Zero) => t(2, 0.0, None),
            (Spde, D1NuHalf, _) => t(2, 0.25, Some(-1.0 / 16.0)),
            (True, D1NuThreeHalves, Zero) => t(4, 1.0 / 720.0, Some(-1.0 / 15120.0)),
            (True, D1NuThreeHalves, _) => t(4, 1.0 / 48.0, Some(-1.0 / 240.0)),
            (Spde, D1NuThreeHalves, Zero) => t(4, 0.0, None),
            (Spde, D1NuThreeHalves, _) => t(4, 1.0 / 16.0, Some(-1.0 / 32.0)),
            (True, D2Nu1, Zero) => t(4, 1.0 / 258.602, Some(1.0 / 6603.35)),
            (True, D2Nu1, NyquistAxis) => t(4, 1.0 / 43.1003, Some(1.0 / 23.8950)),
            (True, D2Nu1, NyquistCorner) => t(4, 1.0 / 86.2007, Some(1.0 / 95.5799)),
            (Spde, D2Nu1, Zero) => t(4, 0.0, None),
            (Spde, D2Nu1, NyquistAxis) => t(4, 1.0 / 16.0, Some(1.0 / 32.0)),
            (Spde, D2Nu1, NyquistCorner) => t(4, 1.0 / 64.0, Some(1.0 / 256.0)),
        }
    }

    /// Coefficients derived independently of the fit: closed forms for the
    /// SPDE and one-dimensional cases, lattice sums for the true 2D cases.
    pub fn derived(&self) -> Result<(f64, f64)> {
        use FrequencyLabel::*;
        use SpdeCase::*;
        use SpectrumModel::*;
        let pi6 = PI.powi(6);
        let pi4 = PI.powi(4);
        Ok(match (self.model, self.case, self.frequency) {
            // pi b coth(pi b) - 1 with b = x / (2 pi).
            (True, D1NuHalf, Zero) => (1.0 / 12.0, -1.0 / 720.0),
            (True, D1NuHalf, _) => {
                let s1 = 2.0 * lattice_sum(LatticeKind::Odd1dP1)?;
                let s2 = 2.0 * lattice_sum(LatticeKind::Odd1dP2)?;
                (s1 / PI.powi(2), -s2 / pi4)
            }
            (Spde, D1NuHalf, Zero) | (Spde, D1NuThreeHalves, Zero) | (Spde, D2Nu1, Zero) => (0.0, 0.0),
            (Spde, D1NuHalf, _) => (0.25, -1.0 / 16.0),
            (True, D1NuThreeHalves, Zero) => {
                let s2 = lattice_sum(LatticeKind::Full1dP2)?;
                let s3 = crate::spectral::lattice_line(0.0, 0.0, 3.0, true, &lattice_cfg(1))?;
                (s2 / (16.0 * pi4), -2.0 * s3 / (64.0 * pi6))
            }
            (True, D1NuThreeHalves, _) => {
                let s2 = 2.0 * lattice_sum(LatticeKind::Odd1dP2)?;
                let s3 = crate::spectral::lattice_line(0.5, 0.0, 3.0, false, &lattice_cfg(1))? / 64.0;
                (s2 / pi4, -2.0 * s3 / pi6)
            }
            (Spde, D1NuThreeHalves, _) => (1.0 / 16.0, -1.0 / 32.0),
            (True, D2Nu1, Zero) => (
                lattice_sum(LatticeKind::Full2d)? / (16.0 * pi4),
                -lattice_sum(LatticeKind::Full2dNext)? / (32.0 * pi6),
            ),
            (True, D2Nu1, NyquistAxis) => (
                lattice_sum(LatticeKind::AxisHalf2d)? / pi4,
                -2.0 * lattice_sum(LatticeKind::AxisHalf2dNext)? / pi6,
            ),
            (True, D2Nu1, NyquistCorner) => (
                lattice_sum(LatticeKind::CornerHalf2d)? / pi4,
                -2.0 * lattice_sum(LatticeKind::CornerHalf2dNext)? / pi6,
            ),
            (Spde, D2Nu1, NyquistAxis) => (1.0 / 16.0, -1.0 / 32.0),
            (Spde, D2Nu1, NyquistCorner) => (1.0 / 64.0, -1.0 / 256.0),
        })
    }

    /// Spectrum at the case's frequency divided by the unaliased Matérn
    /// spectrum at the origin, minus 1 at zero frequency. Uses `delta = 1`
    /// and `alpha = x`.
    pub fn deviation(&self, x: f64) -> Result<f64> {
        let case = self.case;
        let dim = case.dim();
        let phase = self.frequency.phase();
        match self.model {
            SpectrumModel::True => {
                let s = case.nu() + dim as f64 / 2.0;
                let b = x / (2.0 * PI);
                let zero = self.frequency == FrequencyLabel::Zero;
                let sum = aliasing_sum(phase, dim, b, s, zero, &lattice_cfg(dim))?;
                Ok(b.powf(2.0 * s) * sum)
            }
            SpectrumModel::Spde => {
                let p = MaternParams::unit(x, case.nu(), dim)?;
                let omega = Frequency::from_slice(&phase[..dim])?;
                let origin = Frequency::from_slice(&[0.0, 0.0][..dim])?;
                let v = spde_sdf(case, &omega, x, 1.0)? / matern_sdf(&origin, &p)?;
                Ok(if self.frequency == FrequencyLabel::Zero { v - 1.0 } else { v })
            }
        }
    }
}

/// Outcome of fitting one expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub case_id: String,
    pub model: SpectrumModel,
    pub spde_case: SpdeCase,
    pub frequency: FrequencyLabel,
    pub power: i32,
    pub fitted_leading: f64,
    pub fitted_next: f64,
    pub derived_leading: f64,
    pub derived_next: f64,
    pub published_leading: f64,
    pub published_next: Option<f64>,
    /// Fitted against published leading coefficient (absolute when the
    /// published value is 0).
    pub rel_err_leading: f64,
    pub rel_err_next: Option<f64>,
    /// Largest relative residual of the polynomial fit.
    pub fit_residual: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

/// Residual above which a fit is not in the asymptotic regime.
pub const RESIDUAL_LIMIT: f64 = 1e-7;
/// Deviations below this are treated as an exact identity.
pub const EXACT_LIMIT: f64 = 1e-13;

/// `n` log-spaced values between `lo` and `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn rel_err(fit: f64, target: f64) -> f64 {
    if target == 0.0 {
        (fit - target).abs()
    } else {
        (fit - target).abs() / target.abs()
    }
}

/// Fits `deviation(x) / x^power = c0 + c1 x^2 + c2 x^4 + c3 x^6` by least
/// squares over `xs` and compares `(c0, c1)` with published and derived
/// coefficients.
pub fn fit_expansion(case: ExpansionCase, xs: &[f64]) -> Result<ExpansionReport> {
    let published = case.published();
    let (derived_leading, derived_next) = case.derived()?;
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if xs.len() < 3 || !(x_min > 0.0) {
        return Err(Error::Domain("need at least 3 positive alpha*delta values".into()));
    }
    let devs: Vec<f64> = xs.iter().map(|&x| case.deviation(x)).collect::<Result<_>>()?;
    let max_dev = devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if max_dev <= EXACT_LIMIT {
        // An exact identity: the deviation is rounding noise.
        return Ok(ExpansionReport {
            case_id: case.id(),
            model: case.model,
            spde_case: case.case,
            frequency: case.frequency,
            power: published.power,
            fitted_leading: 0.0,
            fitted_next: 0.0,
            derived_leading,
            derived_next,
            published_leading: published.leading,
            published_next: published.next,
            rel_err_leading: rel_err(0.0, published.leading),
            rel_err_next: published.next.map(|p| rel_err(0.0, p)),
            fit_residual: max_dev,
            x_min,
            x_max,
            n_points: xs.len(),
        });
    }
    let ys: Vec<f64> = xs.iter().zip(&devs).map(|(&x, d)| d / x.powi(published.power)).collect();
    let n_coef = xs.len().min(4);
    // Regress on t = (x / x_max)^2 to keep the design well scaled.
    let design = Mat::from_fn(xs.len(), n_coef, |i, j| ((xs[i] / x_max).powi(2)).powi(j as i32));
    let rhs = Mat::from_fn(xs.len(), 1, |i, _| ys[i]);
    let sol = design.qr().solve_lstsq(&rhs);
    let coef: Vec<f64> = (0..n_coef).map(|j| sol[(j, 0)] / x_max.powi(2 * j as i32)).collect();
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let fit_residual = if scale == 0.0 {
        0.0
    } else {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let model: f64 = coef.iter().enumerate().map(|(j, c)| c * x.powi(2 * j as i32)).sum();
                (model - y).abs() / scale
            })
            .fold(0.0, f64::max)
    };
    if fit_residual > RESIDUAL_LIMIT {
        return Err(Error::NonAsymptotic {
            residual: fit_residual,
            limit: RESIDUAL_LIMIT,
        });
    }
    let fitted_leading = coef[0];
    let fitted_next = coef.get(1).copied().unwrap_or(0.0);
    Ok(ExpansionReport {
        case_id: case.id(),
        model: case.model,
        spde_case: case.case,
        frequency: case.frequency,
        power: published.power,
        fitted_leading,
        fitted_next,
        derived_leading,
        derived_next,
        published_leading: published.leading,
        published_next: published.next,
        rel_err_leading: rel_err(fitted_leading, published.leading),
        rel_err_next: published.next.map(|p| rel_err(fitted_next, p)),
        fit_residual,
        x_min,
        x_max,
        n_points: xs.len(),
    })
}

/// Log-log slope of the deviation between the two smallest `x`; equals the
/// leading power in the asymptotic regime.
pub fn leading_slope(case: ExpansionCase, x0: f64, x1: f64) -> Result<f64> {
    let (d0, d1) = (case.deviation(x0)?, case.deviation(x1)?);
    Ok((d1.abs().ln() - d0.abs().ln()) / (x1.ln() - x0.ln()))
}

/// Ratio of the SPDE spectrum to the true aliased spectrum at every DFT
/// frequency of `g` (unit variance).
pub fn spde_ratio_grid(case: SpdeCase, alpha: f64, g: &GridSpec, cfg: &LatticeSumConfig) -> Result<SpectrumGrid> {
    g.require_even()?;
    let p = MaternParams::unit(alpha, case.nu(), case.dim())?;
    let truth = crate::operators::grid_spectrum(&p, g, cfg)?;
    let values = truth
        .values
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(spde_sdf(case, &g.frequency(i), alpha, g.delta)? / t))
        .collect::<Result<Vec<_>>>()?;
    SpectrumGrid::new(g.clone(), values)
}

/// Ratio of the SPDE spectrum to the true aliased spectrum at a single
/// frequency.
pub fn spde_ratio_at(case: SpdeCase, alpha: f64, delta: f64, omega: &Frequency, cfg: &LatticeSumConfig) -> Result<f64> {
    let p = MaternParams::unit(alpha, case.nu(), case.dim())?;
    Ok(spde_sdf(case, omega, alpha, delta)? / crate::spectral::aliased_matern_sdf(omega, &p, delta, cfg)?)
}

/// Remainders of the first- and second-order expansions of `1/(1+x)` and
/// `1/(1+x)^2`: `c(x) = ((1+x)^-1 - 1 + x) / x^2` and
/// `d(x) = ((1+x)^-2 - 1 + 2x) / x^2`.
pub fn expansion_remainders(x: f64) -> (f64, f64) {
    let c = (1.0 / (1.0 + x) - 1.0 + x) / (x * x);
    let d = ((1.0 + x).powi(-2) - 1.0 + 2.0 * x) / (x * x);
    (c, d)
}
