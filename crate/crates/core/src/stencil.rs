use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lattice offset; the second component is zero in one dimension.
pub type Offset = [i64; 2];

/// A finitely supported, symmetric coefficient array on `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilOperator {
    dim: usize,
    entries: BTreeMap<Offset, f64>,
}

impl StencilOperator {
    /// Builds a stencil, checking the centre entry is present and the
    /// coefficients are symmetric under `h -> -h`.
    pub fn new(dim: usize, entries: BTreeMap<Offset, f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("stencil dimension must be 1 or 2, got {dim}")));
        }
        if dim == 1 && entries.keys().any(|h| h[1] != 0) {
            return Err(Error::Domain("one-dimensional stencil has a second offset component".into()));
        }
        let centre = *entries
            .get(&[0, 0])
            .ok_or_else(|| Error::Domain("stencil has no centre entry".into()))?;
        let scale = entries.values().fold(centre.abs(), |m, v| m.max(v.abs()));
        for (h, &v) in &entries {
            let mirror = entries.get(&[-h[0], -h[1]]).copied().unwrap_or(0.0);
            if (v - mirror).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!("stencil is not symmetric at offset {h:?}")));
            }
        }
        Ok(StencilOperator { dim, entries })
    }

    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Offset, f64)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (h, v) in pairs {
            *entries.entry(h).or_insert(0.0) += v;
        }
        Self::new(dim, entries)
    }

    /// The unit impulse `1[h]`.
    pub fn identity(dim: usize) -> Self {
        StencilOperator {
            dim,
            entries: BTreeMap::from([([0, 0], 1.0)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, h: Offset) -> f64 {
        self.entries.get(&h).copied().unwrap_or(0.0)
    }

    pub fn centre(&self) -> f64 {
        self.get([0, 0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Offset, f64)> + '_ {
        self.entries.iter().map(|(h, v)| (*h, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest `|h|_inf` among stored offsets.
    pub fn support_radius(&self) -> usize {
        self.entries
            .keys()
            .map(|h| h[0].unsigned_abs().max(h[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// `self[h] / self[0]`.
    pub fn ratio(&self, h: Offset) -> f64 {
        self.get(h) / self.centre()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        StencilOperator {
            dim: self.dim,
            entries: self.entries.iter().map(|(h, v)| (*h, v * factor)).collect(),
        }
    }

    /// Largest absolute coefficient difference against `other`.
    pub fn max_abs_diff(&self, other: &StencilOperator) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.entries.keys().chain(other.entries.keys()).collect();
        keys.into_iter()
            .map(|h| (self.get(*h) - other.get(*h)).abs())
            .fold(0.0, f64::max)
    }
}

/// Weighted discrete convolution `delta^d sum_k a[h - k] b[k]`.
pub fn convolve(a: &StencilOperator, b: &StencilOperator, delta: f64) -> Result<StencilOperator> {
    if a.dim != b.dim {
        return Err(Error::Domain(format!(
            "cannot convolve stencils of dimension {} and {}",
            a.dim, b.dim
        )));
    }
    crate::spectral::check_delta(delta)?;
    let weight = delta.powi(a.dim as i32);
    let mut out = BTreeMap::new();
    for (ha, va) in a.iter() {
        for (hb, vb) in b.iter() {
            *out.entry([ha[0] + hb[0], ha[1] + hb[1]]).or_insert(0.0) += weight * va * vb;
        }
    }
    Ok(StencilOperator { dim: a.dim, entries: out })
}
