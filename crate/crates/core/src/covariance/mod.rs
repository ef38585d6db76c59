//! Matérn covariance in the spatial domain, dense grid covariance matrices
//! and periodic-embedding covariances for the SPDE models.

mod bessel;

pub use bessel::bessel_k;

use faer::linalg::solvers::Llt;
use faer::{Mat, Side};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;
use crate::spectral::{spde_sdf, MaternParams, SpdeCase};

/// Matérn covariance at lag `h` (length `p.dim`).
pub fn matern_cov(h: &[f64], p: &MaternParams) -> Result<f64> {
    p.validate()?;
    if h.len() != p.dim {
        return Err(Error::Domain(format!("lag has {} components, expected {}", h.len(), p.dim)));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("lag must be finite".into()));
    }
    let r = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    matern_cov_at_distance(r, p)
}

/// Matérn covariance as a function of distance.
pub fn matern_cov_at_distance(r: f64, p: &MaternParams) -> Result<f64> {
    let u = p.alpha * r;
    if u == 0.0 {
        return Ok(p.sigma2);
    }
    if (p.nu - 0.5).abs() < 1e-15 {
        return Ok(p.sigma2 * (-u).exp());
    }
    // Far enough out that the value underflows relative to sigma2.
    if u > 700.0 {
        return Ok(0.0);
    }
    let k = bessel_k(p.nu, u)?;
    let log_scale = p.nu * u.ln() - ln_gamma(p.nu) - (p.nu - 1.0) * std::f64::consts::LN_2;
    Ok(p.sigma2 * log_scale.exp() * k)
}

/// Covariances indexed by absolute grid offsets `(|dx|, |dy|)`.
///
/// Every covariance used here is even in each coordinate separately, so
/// this table determines the full covariance over lags of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTable {
    shape: [usize; 2],
    values: Vec<f64>,
}

impl LagTable {
    pub fn from_fn(shape: [usize; 2], mut f: impl FnMut([usize; 2]) -> Result<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                values.push(f([i, j])?);
            }
        }
        Ok(LagTable { shape, values })
    }

    /// Matérn covariances on the lags of `g` (non-periodic).
    pub fn matern(g: &GridSpec, p: &MaternParams) -> Result<Self> {
        check_dims(g, p.dim)?;
        Self::from_fn(g.shape2(), |[i, j]| {
            let r = g.delta * ((i * i + j * j) as f64).sqrt();
            matern_cov_at_distance(r, p)
        })
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn get(&self, lag: [usize; 2]) -> f64 {
        self.values[lag[0] * self.shape[1] + lag[1]]
    }

    /// Value at a signed lag.
    pub fn at(&self, h: [i64; 2]) -> f64 {
        self.get([h[0].unsigned_abs() as usize, h[1].unsigned_abs() as usize])
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }
}

/// Where covariance matrix entries come from.
#[derive(Debug, Clone, Copy)]
pub enum CovSource<'a> {
    /// Stationary Matérn covariance on the open (non-periodic) grid.
    Matern(&'a MaternParams),
    /// A unit-variance lag table (typically periodic), scaled by `sigma2`.
    Lags { table: &'a LagTable, sigma2: f64 },
}

/// Dense symmetric covariance matrix over the row-major points of a grid.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    mat: Mat<f64>,
}

impl CovMatrix {
    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.mat
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let llt = self
            .mat
            .llt(Side::Lower)
            .map_err(|e| Error::Conditioning(format!("Cholesky failed: {e:?}")))?;
        Ok(CholeskyFactor { llt })
    }
}

/// Lower Cholesky factor of a covariance matrix.
pub struct CholeskyFactor {
    llt: Llt<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `(max_i L_ii / min_i L_ii)^2`, a cheap lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        let l = self.llt.L();
        let (lo, hi) = (0..l.nrows()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let d = l[(i, i)];
            (lo.min(d), hi.max(d))
        });
        (hi / lo).powi(2)
    }

    /// `L^{-1} y`.
    pub fn whiten(&self, y: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
        self.llt.L().solve_lower_triangular_in_place(rhs.as_mut());
        (0..y.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// `y' Sigma^{-1} y`.
    pub fn quad_form(&self, y: &[f64]) -> f64 {
        self.whiten(y).iter().map(|v| v * v).sum()
    }

    /// `Sigma^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let l = self.llt.L();
        (0..l.nrows())
            .map(|i| (0..=i).map(|k| l[(i, k)] * z[k]).sum())
            .collect()
    }
}

/// Dense covariance matrix on `g`, with nugget `sigma2 * tau2` on the
/// diagonal. Exactly symmetric: every entry is read from a lag table.
pub fn build_cov_matrix(g: &GridSpec, source: CovSource<'_>, tau2: f64) -> Result<CovMatrix> {
    g.validate()?;
    if !(tau2.is_finite() && tau2 >= 0.0) {
        return Err(Error::Domain(format!("nugget ratio must be nonnegative, got {tau2}")));
    }
    if g.len() > 10_000 {
        return Err(Error::InvalidGrid(format!("dense covariance limited to 10^4 points, got {}", g.len())));
    }
    let owned;
    let (table, sigma2) = match source {
        CovSource::Matern(p) => {
            owned = LagTable::matern(g, p)?;
            (&owned, 1.0)
        }
        CovSource::Lags { table, sigma2 } => {
            let [n1, n2] = g.shape2();
            if table.shape[0] < n1 || table.shape[1] < n2 {
                return Err(Error::InvalidGrid(format!(
                    "lag table {:?} does not cover grid {:?}",
                    table.shape, g.size
                )));
            }
            if !(sigma2.is_finite() && sigma2 > 0.0) {
                return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
            }
            (table, sigma2)
        }
    };
    let nugget = match source {
        CovSource::Matern(p) => p.sigma2 * tau2,
        CovSource::Lags { sigma2, .. } => sigma2 * tau2,
    };
    let n = g.len();
    let mat = Mat::from_fn(n, n, |i, j| {
        let a = g.multi_index(i);
        let b = g.multi_index(j);
        let v = sigma2 * table.get([a[0].abs_diff(b[0]), a[1].abs_diff(b[1])]);
        if i == j {
            v + nugget
        } else {
            v
        }
    });
    Ok(CovMatrix { mat })
}

/// Unit-variance SPDE covariances from a periodic embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCovariance {
    /// Covariances on the lags of the output grid.
    pub lags: LagTable,
    /// Largest `|C(h)| / C(0)` on the half-period shell of the embedding.
    pub wrap: f64,
}

/// Limit on the relative covariance at the half-period shell.
pub const WRAP_LIMIT: f64 = 1e-8;

/// SPDE covariances on the lags of `g_out` from the spectrum on the torus
/// `g_embed`, failing if the embedding shows more than `WRAP_LIMIT`
/// wrap-around.
pub fn spde_cov_periodic(
    g_embed: &GridSpec,
    g_out: &GridSpec,
    case: SpdeCase,
    alpha: f64,
) -> Result<PeriodicCovariance> {
    let pc = spde_cov_periodic_unchecked(g_embed, g_out, case, alpha)?;
    if pc.wrap > WRAP_LIMIT {
        return Err(Error::EmbeddingTooSmall {
            wrap: pc.wrap,
            limit: WRAP_LIMIT,
        });
    }
    Ok(pc)
}

/// As [`spde_cov_periodic`] but only reports the wrap-around. The spacing of
/// `g_out` must be an integer multiple of the embedding spacing.
pub fn spde_cov_periodic_unchecked(
    g_embed: &GridSpec,
    g_out: &GridSpec,
    case: SpdeCase,
    alpha: f64,
) -> Result<PeriodicCovariance> {
    g_embed.validate()?;
    g_out.validate()?;
    check_dims(g_embed, case.dim())?;
    check_dims(g_out, case.dim())?;
    let ratio_f = g_out.delta / g_embed.delta;
    let ratio = ratio_f.round() as usize;
    if ratio == 0 || (ratio_f - ratio as f64).abs() > 1e-9 * ratio_f {
        return Err(Error::InvalidGrid(format!(
            "output spacing {} is not a multiple of embedding spacing {}",
            g_out.delta, g_embed.delta
        )));
    }
    for axis in 0..case.dim() {
        if g_out.size[axis] * ratio >= g_embed.size[axis] {
            return Err(Error::InvalidGrid(format!(
                "embedding {:?} is not larger than output grid {:?} at ratio {ratio}",
                g_embed.size, g_out.size
            )));
        }
    }
    let n = g_embed.len();
    let mut spectrum = Vec::with_capacity(n);
    for idx in 0..n {
        spectrum.push(spde_sdf(case, &g_embed.frequency(idx), alpha, g_embed.delta)?);
    }
    let cov = periodic_coefficients(g_embed, &spectrum);

    let [e1, e2] = g_embed.shape2();
    let c0 = cov[0];
    let mut wrap = 0.0f64;
    for idx in 0..n {
        let [j1, j2] = g_embed.multi_index(idx);
        let on_shell = j1 == e1 / 2 || (e2 > 1 && j2 == e2 / 2);
        if on_shell {
            wrap = wrap.max(cov[idx].abs() / c0);
        }
    }
    let lags = LagTable::from_fn(g_out.shape2(), |[i, j]| {
        Ok(cov[g_embed.linear_index([i * ratio, j * ratio])])
    })?;
    Ok(PeriodicCovariance { lags, wrap })
}

/// Coefficients `IDFT(values) / (N delta)^d` of a spectrum sampled at the
/// DFT frequencies of `g`.
pub(crate) fn periodic_coefficients(g: &GridSpec, values: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (g.len() as f64 * g.delta.powi(g.dim() as i32));
    let mut out = fft::inverse_real(g, values);
    for v in &mut out {
        *v *= scale;
    }
    out
}

fn check_dims(g: &GridSpec, dim: usize) -> Result<()> {
    if g.dim() != dim {
        return Err(Error::InvalidGrid(format!("grid has {} axes, expected {dim}", g.dim())));
    }
    Ok(())
}
