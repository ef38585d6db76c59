use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Frequency;

/// A finite periodic grid with spacing `delta` and `size[i]` points along
/// axis `i`. Linear indices are row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta: f64,
    pub size: Vec<usize>,
}

impl GridSpec {
    pub fn new(delta: f64, size: Vec<usize>) -> Result<Self> {
        let g = GridSpec { delta, size };
        g.validate()?;
        Ok(g)
    }

    pub fn d1(delta: f64, n: usize) -> Result<Self> {
        Self::new(delta, vec![n])
    }

    pub fn d2(delta: f64, n1: usize, n2: usize) -> Result<Self> {
        Self::new(delta, vec![n1, n2])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {}", self.delta)));
        }
        if self.size.is_empty() || self.size.len() > 2 {
            return Err(Error::InvalidGrid(format!("grid must have 1 or 2 axes, got {}", self.size.len())));
        }
        if let Some(n) = self.size.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("each axis needs at least 2 points, got {n}")));
        }
        Ok(())
    }

    /// Fails unless every axis has an even number of points, so that the
    /// Nyquist frequency `1/(2 delta)` is a grid frequency.
    pub fn require_even(&self) -> Result<()> {
        if self.size.iter().any(|n| n % 2 != 0) {
            return Err(Error::InvalidGrid(format!(
                "even sizes required for an on-grid Nyquist frequency, got {:?}",
                self.size
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.size.len()
    }

    pub fn len(&self) -> usize {
        self.size.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sizes padded to two axes (`[n, 1]` in one dimension).
    pub fn shape2(&self) -> [usize; 2] {
        match self.size[..] {
            [n] => [n, 1],
            [n1, n2] => [n1, n2],
            _ => unreachable!("validated grid"),
        }
    }

    /// Multi-index of a linear index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let [_, n2] = self.shape2();
        [idx / n2, idx % n2]
    }

    pub fn linear_index(&self, j: [usize; 2]) -> usize {
        let [_, n2] = self.shape2();
        j[0] * n2 + j[1]
    }

    /// DFT frequency `j / (N delta)` of a linear index, in `[0, 1/delta)^d`.
    pub fn frequency(&self, idx: usize) -> Frequency {
        let j = self.multi_index(idx);
        let f = |axis: usize| j[axis] as f64 / (self.size[axis] as f64 * self.delta);
        match self.dim() {
            1 => Frequency::d1(f(0)),
            _ => Frequency::d2(f(0), f(1)),
        }
    }

    /// Signed offset of a periodic index along an axis, in `(-N/2, N/2]`.
    pub fn signed_offset(&self, axis: usize, j: usize) -> i64 {
        let n = self.size[axis];
        if j > n / 2 {
            j as i64 - n as i64
        } else {
            j as i64
        }
    }

    /// Periodic index of a signed offset along an axis.
    pub fn wrap(&self, axis: usize, h: i64) -> usize {
        h.rem_euclid(self.size[axis] as i64) as usize
    }

    /// Physical coordinates of a linear index (non-periodic layout from the origin).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let j = self.multi_index(idx);
        [j[0] as f64 * self.delta, j[1] as f64 * self.delta]
    }
}

/// Nonnegative spectral values at every DFT frequency of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SpectrumGrid {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "spectrum has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("spectral values must be finite and nonnegative".into()));
        }
        Ok(SpectrumGrid { grid, values })
    }

    /// Constant spectrum.
    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpectrumGrid {
        SpectrumGrid {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
