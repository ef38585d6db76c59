//! Unnormalized forward/inverse DFTs over one- and two-axis grids.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::grid::GridSpec;

/// In-place DFT of a row-major buffer laid out on `grid`. The inverse
/// transform uses `exp(+i 2 pi j.h / N)` and is not scaled.
pub fn transform(grid: &GridSpec, data: &mut [Complex64], direction: FftDirection) {
    let [n1, n2] = grid.shape2();
    assert_eq!(data.len(), n1 * n2);
    let mut planner = FftPlanner::new();
    if n2 > 1 {
        let fft = planner.plan_fft(n2, direction);
        fft.process(data);
    }
    if n1 > 1 {
        let fft = planner.plan_fft(n1, direction);
        if n2 == 1 {
            fft.process(data);
        } else {
            let mut column = vec![Complex64::default(); n1];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for c in 0..n2 {
                for r in 0..n1 {
                    column[r] = data[r * n2 + c];
                }
                fft.process_with_scratch(&mut column, &mut scratch);
                for r in 0..n1 {
                    data[r * n2 + c] = column[r];
                }
            }
        }
    }
}

/// Unscaled inverse DFT of real values, returning the real part.
pub fn inverse_real(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut buf, FftDirection::Inverse);
    buf.into_iter().map(|c| c.re).collect()
}

/// Unscaled forward DFT of real values.
pub fn forward_real(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut buf, FftDirection::Forward);
    buf
}
