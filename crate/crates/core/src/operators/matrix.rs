use crate::covariance::{build_cov_matrix, CovSource};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::MaternParams;
use crate::stencil::StencilOperator;

/// Largest accepted condition estimate for the dense covariance.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Row of the inverse of the dense (non-periodic) covariance matrix at the
/// centre point of `g`, indexed by offset from that point. Sizes must be odd
/// so the centre is a grid point.
pub fn matrix_inverse_row(p: &MaternParams, g: &GridSpec) -> Result<StencilOperator> {
    g.validate()?;
    if g.dim() != p.dim {
        return Err(Error::InvalidGrid(format!("grid has {} axes, parameters have d={}", g.dim(), p.dim)));
    }
    if g.size.iter().any(|n| n % 2 == 0) {
        return Err(Error::InvalidGrid(format!("odd sizes required for a centre point, got {:?}", g.size)));
    }
    let factor = build_cov_matrix(g, CovSource::Matern(p), 0.0)?.cholesky()?;
    let cond = factor.condition_estimate();
    if cond > CONDITION_LIMIT {
        return Err(Error::Conditioning(format!("condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")));
    }
    let [n1, n2] = g.shape2();
    let centre = [n1 / 2, n2 / 2];
    let c = g.linear_index(centre);
    let mut e = vec![0.0; g.len()];
    e[c] = 1.0;
    let q = factor.solve(&e);
    let offset = |idx: usize| {
        let j = g.multi_index(idx);
        [j[0] as i64 - centre[0] as i64, j[1] as i64 - centre[1] as i64]
    };
    let at = |h: [i64; 2]| q[g.linear_index([(centre[0] as i64 + h[0]) as usize, (centre[1] as i64 + h[1]) as usize])];
    let qc = q[c];
    let pairs = (0..g.len()).filter_map(|idx| {
        let h = offset(idx);
        // Average with the mirror entry to remove rounding asymmetry.
        let v = 0.5 * (q[idx] + at([-h[0], -h[1]]));
        (h == [0, 0] || v.abs() > super::STORE_THRESHOLD * qc.abs()).then_some((h, v))
    });
    StencilOperator::from_pairs(g.dim(), pairs.collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::inverse_operator;
    use crate::spectral::LatticeSumConfig;

    #[test]
    fn exponential_is_markov() {
        let p = MaternParams::unit(0.5, 0.5, 1).unwrap();
        let row = matrix_inverse_row(&p, &GridSpec::d1(1.0, 41).unwrap()).unwrap();
        for h in 2..10 {
            assert!(row.ratio([h, 0]).abs() < 1e-8);
        }
        // Interior rows of the open-grid inverse coincide with the infinite operator.
        let op = inverse_operator(&p, &GridSpec::d1(1.0, 1024).unwrap(), &LatticeSumConfig::for_dim(1)).unwrap();
        assert!((row.ratio([1, 0]) - op.ratio([1, 0])).abs() < 0.02 * op.ratio([1, 0]).abs());
    }

    #[test]
    fn three_halves_has_long_tail() {
        let p = MaternParams::unit(0.3, 1.5, 1).unwrap();
        let row = matrix_inverse_row(&p, &GridSpec::d1(1.0, 41).unwrap()).unwrap();
        assert!(row.ratio([3, 0]).abs() > 1e-4);
    }

    #[test]
    fn ill_conditioned_rejected() {
        let p = MaternParams::unit(0.005, 3.5, 1).unwrap();
        assert!(matches!(
            matrix_inverse_row(&p, &GridSpec::d1(1.0, 41).unwrap()),
            Err(Error::Conditioning(_))
        ));
        assert!(matrix_inverse_row(&p, &GridSpec::d1(1.0, 40).unwrap()).is_err());
    }
}
