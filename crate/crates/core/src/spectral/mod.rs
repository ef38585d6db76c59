//! Matérn spectral densities, their aliased versions on a lattice of
//! spacing `delta`, and the spectra implied by the SPDE precision stencils.

mod lattice;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stencil::StencilOperator;

pub(crate) use lattice::{line_sum as lattice_line, plane_sum as lattice_plane};

/// Matérn covariance parameters `(sigma2, alpha, nu)` in dimension 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub alpha: f64,
    pub nu: f64,
    pub dim: usize,
}

impl MaternParams {
    pub fn new(sigma2: f64, alpha: f64, nu: f64, dim: usize) -> Result<Self> {
        let p = MaternParams {
            sigma2,
            alpha,
            nu,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit-variance parameters.
    pub fn unit(alpha: f64, nu: f64, dim: usize) -> Result<Self> {
        Self::new(1.0, alpha, nu, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::Domain(format!("nu must be positive, got {}", self.nu)));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Domain(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        let n = self.normalizer();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain(format!("normalizing constant is not finite: {n}")));
        }
        Ok(())
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Exponent `nu + d/2` of the spectral density.
    pub fn exponent(&self) -> f64 {
        self.nu + self.dim as f64 / 2.0
    }

    /// `2^d pi^(d/2) alpha^(2 nu) Gamma(nu + d/2) / Gamma(nu)`.
    pub fn normalizer(&self) -> f64 {
        let d = self.dim as f64;
        let log = d * 2f64.ln() + 0.5 * d * PI.ln() + 2.0 * self.nu * self.alpha.ln()
            + ln_gamma(self.nu + d / 2.0)
            - ln_gamma(self.nu);
        log.exp()
    }

    /// Unaliased density at the origin, `sigma2 N alpha^(-2 nu - d)`.
    pub fn sdf_at_zero(&self) -> f64 {
        self.sigma2 * self.normalizer() * self.alpha.powf(-2.0 * self.exponent())
    }
}

/// A frequency vector in cycles per unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    omega: [f64; 2],
    dim: usize,
}

impl Frequency {
    pub fn d1(omega: f64) -> Self {
        Frequency {
            omega: [omega, 0.0],
            dim: 1,
        }
    }

    pub fn d2(omega1: f64, omega2: f64) -> Self {
        Frequency {
            omega: [omega1, omega2],
            dim: 2,
        }
    }

    pub fn from_slice(omega: &[f64]) -> Result<Self> {
        match *omega {
            [w] => Ok(Self::d1(w)),
            [w1, w2] => Ok(Self::d2(w1, w2)),
            _ => Err(Error::Domain(format!("frequency must have 1 or 2 components, got {}", omega.len()))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega[..self.dim]
    }

    pub fn norm_sq(&self) -> f64 {
        self.as_slice().iter().map(|w| w * w).sum()
    }

    /// Shift `omega * delta` into the unit cell `[0, 1)^d`.
    pub fn reduced_phase(&self, delta: f64) -> [f64; 2] {
        let mut y = [0.0; 2];
        for (dst, &w) in y.iter_mut().zip(self.as_slice()) {
            let t = w * delta;
            let r = t - t.floor();
            *dst = if r >= 1.0 { 0.0 } else { r };
        }
        y
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::Domain(format!(
                "frequency has dimension {} but parameters have dimension {dim}",
                self.dim
            )));
        }
        if self.as_slice().iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("frequency components must be finite".into()));
        }
        Ok(())
    }
}

/// Controls the truncation of aliasing sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumConfig {
    pub rel_tol: f64,
    pub max_radius: usize,
}

impl LatticeSumConfig {
    pub fn new(rel_tol: f64, max_radius: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::Domain(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        if max_radius < 8 {
            return Err(Error::Domain(format!("max_radius must be at least 8, got {max_radius}")));
        }
        Ok(LatticeSumConfig { rel_tol, max_radius })
    }

    pub fn for_dim(dim: usize) -> Self {
        LatticeSumConfig {
            rel_tol: 1e-10,
            max_radius: if dim == 1 { 1 << 20 } else { 1 << 12 },
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

impl Default for LatticeSumConfig {
    fn default() -> Self {
        Self::for_dim(1)
    }
}

/// Unaliased Matérn spectral density `sigma2 N (alpha^2 + 4 pi^2 |omega|^2)^(-nu - d/2)`.
pub fn matern_sdf(omega: &Frequency, p: &MaternParams) -> Result<f64> {
    p.validate()?;
    omega.check(p.dim)?;
    let base = p.alpha * p.alpha + 4.0 * PI * PI * omega.norm_sq();
    Ok(p.sigma2 * p.normalizer() * base.powf(-p.exponent()))
}

/// Dimensionless aliasing sum `sum_k (b^2 + |y + k|^2)^(-s)` with
/// `y = omega * delta` reduced to the unit cell and `b = alpha delta / (2 pi)`.
///
/// With `exclude_origin` the `k = 0` term is left out, which lets callers
/// isolate the aliased excess at `omega = 0` without cancellation.
pub fn aliasing_sum(
    phase: [f64; 2],
    dim: usize,
    b: f64,
    s: f64,
    exclude_origin: bool,
    cfg: &LatticeSumConfig,
) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("scaled inverse range must be positive, got {b}")));
    }
    let c = b * b;
    match dim {
        1 => lattice::line_sum(phase[0], c, s, exclude_origin, cfg),
        2 => lattice::plane_sum(phase, c, s, exclude_origin, cfg),
        _ => Err(Error::Domain(format!("dimension must be 1 or 2, got {dim}"))),
    }
}

/// Aliased Matérn spectral density on a grid of spacing `delta`.
pub fn aliased_matern_sdf(
    omega: &Frequency,
    p: &MaternParams,
    delta: f64,
    cfg: &LatticeSumConfig,
) -> Result<f64> {
    p.validate()?;
    omega.check(p.dim)?;
    check_delta(delta)?;
    let s = p.exponent();
    let b = p.alpha * delta / (2.0 * PI);
    let sum = aliasing_sum(omega.reduced_phase(delta), p.dim, b, s, false, cfg)?;
    let scale = (delta / (2.0 * PI)).powf(2.0 * s);
    Ok(p.sigma2 * p.normalizer() * scale * sum)
}

/// Closed form of the aliased exponential (`nu = 1/2`, `d = 1`) spectrum,
/// unit variance.
pub fn exp1d_aliased_closed(omega: f64, alpha: f64, delta: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_delta(delta)?;
    if !omega.is_finite() {
        return Err(Error::Domain("frequency must be finite".into()));
    }
    let x = alpha * delta;
    let r = (-x).exp();
    let half_angle = (PI * omega * delta).sin();
    // 1 + r^2 - 2 r cos(theta) rewritten to avoid cancellation at small x.
    let denom = (-x).exp_m1().powi(2) + 4.0 * r * half_angle * half_angle;
    Ok(delta * -(-2.0 * x).exp_m1() / denom)
}

/// The three SPDE constructions with an integer `nu + d/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpdeCase {
    #[serde(rename = "d1_nu_half")]
    D1NuHalf,
    #[serde(rename = "d1_nu_3half")]
    D1NuThreeHalves,
    #[serde(rename = "d2_nu_1")]
    D2Nu1,
}

impl SpdeCase {
    pub const ALL: [SpdeCase; 3] = [SpdeCase::D1NuHalf, SpdeCase::D1NuThreeHalves, SpdeCase::D2Nu1];

    pub fn dim(self) -> usize {
        match self {
            SpdeCase::D1NuHalf | SpdeCase::D1NuThreeHalves => 1,
            SpdeCase::D2Nu1 => 2,
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            SpdeCase::D1NuHalf => 0.5,
            SpdeCase::D1NuThreeHalves => 1.5,
            SpdeCase::D2Nu1 => 1.0,
        }
    }

    /// Case matching a Matérn smoothness and dimension, if one exists.
    pub fn for_matern(nu: f64, dim: usize) -> Result<Self> {
        SpdeCase::ALL
            .into_iter()
            .find(|c| c.dim() == dim && (c.nu() - nu).abs() < 1e-12)
            .ok_or_else(|| Error::UnsupportedCase(format!("no SPDE stencil for nu={nu}, d={dim}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            SpdeCase::D1NuHalf => "d1_nu_half",
            SpdeCase::D1NuThreeHalves => "d1_nu_3half",
            SpdeCase::D2Nu1 => "d2_nu_1",
        }
    }
}

impl fmt::Display for SpdeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpdeCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpdeCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnsupportedCase(s.to_string()))
    }
}

/// Precision stencil of the SPDE approximation, including the normalizing
/// prefactors that make its spectrum match the Matérn one at the origin.
pub fn spde_stencil(case: SpdeCase, alpha: f64, delta: f64) -> Result<StencilOperator> {
    check_positive("alpha", alpha)?;
    check_delta(delta)?;
    let x = alpha * delta;
    match case {
        SpdeCase::D1NuHalf => StencilOperator::from_pairs(
            1,
            [([0, 0], x / 2.0 + 1.0 / x), ([1, 0], -0.5 / x), ([-1, 0], -0.5 / x)],
        ),
        SpdeCase::D1NuThreeHalves => {
            let c0 = (x / 2.0 + 1.0 / x).powi(2) + 0.5 / (x * x);
            let c1 = -0.5 - 1.0 / (x * x);
            let c2 = 0.25 / (x * x);
            StencilOperator::from_pairs(
                1,
                [
                    ([0, 0], c0 / x),
                    ([1, 0], c1 / x),
                    ([-1, 0], c1 / x),
                    ([2, 0], c2 / x),
                    ([-2, 0], c2 / x),
                ],
            )
        }
        SpdeCase::D2Nu1 => {
            let norm = 4.0 * PI * x * x;
            let a = 4.0 + x * x;
            let mut pairs = vec![([0, 0], (a * a + 4.0) / norm)];
            for h in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
                pairs.push((h, -2.0 * a / norm));
            }
            for h in [[1, 1], [1, -1], [-1, 1], [-1, -1]] {
                pairs.push((h, 2.0 / norm));
            }
            for h in [[2, 0], [-2, 0], [0, 2], [0, -2]] {
                pairs.push((h, 1.0 / norm));
            }
            StencilOperator::from_pairs(2, pairs)
        }
    }
}

/// `delta^d sum_h s[h] exp(-i 2 pi delta omega . h)`.
pub fn stencil_sdf(s: &StencilOperator, omega: &Frequency, delta: f64) -> Result<Complex64> {
    check_delta(delta)?;
    omega.check(s.dim())?;
    let w = omega.as_slice();
    let mut acc = Complex64::new(0.0, 0.0);
    for (h, c) in s.iter() {
        let phase: f64 = w.iter().zip(h.iter()).map(|(wi, &hi)| wi * hi as f64).sum();
        acc += Complex64::from_polar(c, -2.0 * PI * delta * phase);
    }
    Ok(acc * delta.powi(s.dim() as i32))
}

/// Spectral density of the SPDE approximation (unit variance), evaluated in
/// closed form. Equals `delta^(2d)` over the stencil spectrum.
pub fn spde_sdf(case: SpdeCase, omega: &Frequency, alpha: f64, delta: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_delta(delta)?;
    omega.check(case.dim())?;
    // 2 - 2 cos(theta) = 4 sin^2(theta/2)
    let lap: f64 = omega.as_slice().iter().map(|w| 4.0 * (PI * w * delta).sin().powi(2)).sum();
    Ok(spde_sdf_from_laplacian(case, lap, alpha, delta))
}

/// SPDE spectrum as a function of the discrete Laplacian symbol
/// `sum_i 4 sin^2(pi omega_i delta)`.
pub(crate) fn spde_sdf_from_laplacian(case: SpdeCase, lap: f64, alpha: f64, delta: f64) -> f64 {
    let x = alpha * delta;
    match case {
        SpdeCase::D1NuHalf => delta / (x / 2.0 + lap / (2.0 * x)),
        SpdeCase::D1NuThreeHalves => {
            let poly = x / 2.0 + lap / (2.0 * x);
            alpha * delta * delta / (poly * poly)
        }
        SpdeCase::D2Nu1 => {
            let poly = x * x + lap;
            4.0 * PI * alpha * alpha * delta.powi(4) / (poly * poly)
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    check_positive("delta", delta)
}
