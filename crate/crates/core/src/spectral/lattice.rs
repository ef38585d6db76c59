//! Power-law lattice sums with Euler–Maclaurin tail corrections.
//!
//! Everything here works in dimensionless lattice units: the summand is
//! `(c + |y + k|^2)^(-s)` for integer vectors `k`, a shift `y` in the unit
//! cell, and an offset `c > 0`. Callers rescale by `(Delta / 2 pi)^(2s)`.

use statrs::function::gamma::ln_gamma;

use super::LatticeSumConfig;
use crate::error::{Error, Result};

/// Rows of a planar sum with `|k1| <= EXPLICIT_ROWS` are summed term by term;
/// farther rows are replaced by their integral, which is exact up to
/// `exp(-2 pi EXPLICIT_ROWS)` relative error by Poisson summation.
const EXPLICIT_ROWS: i64 = 8;

/// `u^(-s)` with fast paths for integer and half-integer exponents.
#[derive(Debug, Clone, Copy)]
pub(crate) enum NegPow {
    Int(i32),
    Half(i32),
    Real(f64),
}

impl NegPow {
    pub(crate) fn new(s: f64) -> Self {
        let twice = 2.0 * s;
        if s.fract() == 0.0 && s.abs() <= 64.0 {
            NegPow::Int(s as i32)
        } else if twice.fract() == 0.0 && twice.abs() <= 129.0 {
            NegPow::Half(twice as i32)
        } else {
            NegPow::Real(s)
        }
    }

    #[inline]
    pub(crate) fn eval(self, u: f64) -> f64 {
        match self {
            NegPow::Int(n) => u.powi(-n),
            NegPow::Half(n) => u.sqrt().powi(-n),
            NegPow::Real(s) => u.powf(-s),
        }
    }
}

/// `int_a^inf (c + t^2)^(-s) dt` for `a^2 > c`, by binomial expansion of
/// `(1 + c/t^2)^(-s)` integrated term by term.
fn tail_integral(a: f64, c: f64, s: f64) -> f64 {
    debug_assert!(a * a > c && s > 0.5);
    let ratio = c / (a * a);
    let lead = a.powf(1.0 - 2.0 * s);
    let mut coef = 1.0;
    let mut total = 0.0;
    for j in 0..400 {
        let jf = j as f64;
        let term = coef * lead / (2.0 * s + 2.0 * jf - 1.0);
        total += term;
        if term.abs() <= 1e-18 * total.abs() {
            break;
        }
        coef *= -(s + jf) / (jf + 1.0) * ratio;
    }
    total
}

/// Midpoint Euler–Maclaurin estimate of `sum_{j>=0} f(a + 1/2 + j)` for
/// `f(t) = (c + t^2)^(-s)`, two derivative corrections.
fn midpoint_tail(a: f64, c: f64, s: f64) -> f64 {
    let u = c + a * a;
    let p1 = u.powf(-s - 1.0);
    let p2 = p1 / u;
    let p3 = p2 / u;
    let d1 = -2.0 * s * a * p1;
    let d3 = 12.0 * s * (s + 1.0) * a * p2 - 8.0 * s * (s + 1.0) * (s + 2.0) * a * a * a * p3;
    tail_integral(a, c, s) + d1 / 24.0 - 7.0 * d3 / 5760.0
}

/// `sum_{k >= start} (c + (y + k)^2)^(-s)` for `y + start > 0`.
pub(crate) fn half_line_sum(y: f64, start: i64, c: f64, s: f64, cfg: &LatticeSumConfig) -> Result<f64> {
    let pow = NegPow::new(s);
    let term = |k: i64| {
        let t = y + k as f64;
        pow.eval(c + t * t)
    };
    let min_cut = (2.0 * c.sqrt() + 1.0).ceil() as i64;
    let mut cut = (start + 8).max(min_cut).max(start);
    let mut explicit: f64 = (start..=cut).map(term).sum();
    let mut estimate = explicit + midpoint_tail(y + cut as f64 + 0.5, c, s);
    loop {
        let next_cut = 2 * cut;
        if next_cut as usize > cfg.max_radius {
            let achieved = (estimate - explicit).abs() / estimate.abs().max(f64::MIN_POSITIVE);
            return Err(Error::Truncation {
                radius: cut as usize,
                achieved,
                rel_tol: cfg.rel_tol,
            });
        }
        explicit += (cut + 1..=next_cut).map(term).sum::<f64>();
        let refined = explicit + midpoint_tail(y + next_cut as f64 + 0.5, c, s);
        let change = (refined - estimate).abs();
        cut = next_cut;
        estimate = refined;
        if change <= cfg.rel_tol * refined.abs() {
            return Ok(refined);
        }
    }
}

/// `sum_{k in Z} (c + (y + k)^2)^(-s)` with `y` in `[0, 1)`.
pub(crate) fn line_sum(y: f64, c: f64, s: f64, skip_zero: bool, cfg: &LatticeSumConfig) -> Result<f64> {
    let centre = if skip_zero {
        0.0
    } else {
        NegPow::new(s).eval(c + y * y)
    };
    let right = half_line_sum(y, 1, c, s, cfg)?;
    let left = half_line_sum(-y, 1, c, s, cfg)?;
    Ok(centre + right + left)
}

/// `sum_{k in Z^2} (c + |y + k|^2)^(-s)` with `y` in `[0, 1)^2`.
pub(crate) fn plane_sum(y: [f64; 2], c: f64, s: f64, skip_origin: bool, cfg: &LatticeSumConfig) -> Result<f64> {
    let mut near = 0.0;
    for k1 in -EXPLICIT_ROWS..=EXPLICIT_ROWS {
        let t = y[0] + k1 as f64;
        near += line_sum(y[1], c + t * t, s, skip_origin && k1 == 0, cfg)?;
    }
    // Far rows: sum over k2 equals sqrt(pi) Gamma(s - 1/2)/Gamma(s) (c + t^2)^(1/2 - s).
    let row_const = (0.5 * std::f64::consts::PI.ln() + ln_gamma(s - 0.5) - ln_gamma(s)).exp();
    let far_right = half_line_sum(y[0], EXPLICIT_ROWS + 1, c, s - 0.5, cfg)?;
    let far_left = half_line_sum(-y[0], EXPLICIT_ROWS + 1, c, s - 0.5, cfg)?;
    Ok(near + row_const * (far_right + far_left))
}
