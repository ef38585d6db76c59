use proptest::prelude::*;

use matgrid::mc::{nelder_mead, NelderMeadSettings, StudyConfig};
use matgrid::operators::{covariance_sequence, sqrt_periodic};
use matgrid::theorems::expansion_remainders;
use matgrid::{
    aliased_matern_sdf, convolve, grid_spectrum, inverse_operator, matern_cov, matern_sdf, run_sim_study,
    spde_sdf, spde_stencil, stencil_sdf, Frequency, GridSpec, LatticeSumConfig, MaternParams, SpdeCase,
};

fn freq(dim: usize, w: [f64; 2]) -> Frequency {
    if dim == 1 {
        Frequency::d1(w[0])
    } else {
        Frequency::d2(w[0], w[1])
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aliased_spectrum_is_periodic(
        dim in 1usize..=2,
        nu in 0.3f64..3.0,
        alpha in 0.05f64..3.0,
        delta in 0.25f64..2.0,
        w in prop::array::uniform2(-1.0f64..1.0),
        m in prop::array::uniform2(-3i32..=3),
    ) {
        let cfg = LatticeSumConfig::for_dim(dim);
        let p = MaternParams::unit(alpha, nu, dim).unwrap();
        let a = aliased_matern_sdf(&freq(dim, w), &p, delta, &cfg).unwrap();
        let shifted = [w[0] + m[0] as f64 / delta, w[1] + m[1] as f64 / delta];
        let b = aliased_matern_sdf(&freq(dim, shifted), &p, delta, &cfg).unwrap();
        prop_assert!(close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn spectra_are_positive_and_even(
        case_idx in 0usize..3,
        alpha in 0.01f64..3.0,
        delta in 0.25f64..2.0,
        w in prop::array::uniform2(0.0f64..0.5),
    ) {
        let case = SpdeCase::ALL[case_idx];
        let dim = case.dim();
        let p = MaternParams::unit(alpha, case.nu(), dim).unwrap();
        let cfg = LatticeSumConfig::for_dim(dim);
        let w = [w[0] / delta, w[1] / delta];
        let om = freq(dim, w);
        let neg = freq(dim, [-w[0], -w[1]]);
        let values = [
            matern_sdf(&om, &p).unwrap(),
            aliased_matern_sdf(&om, &p, delta, &cfg).unwrap(),
            spde_sdf(case, &om, alpha, delta).unwrap(),
            1.0 / spde_sdf(case, &om, alpha, delta).unwrap(),
        ];
        prop_assert!(values.iter().all(|v| v.is_finite() && *v > 0.0), "{values:?}");
        // Aliasing only adds power.
        prop_assert!(values[1] >= values[0] * (1.0 - 1e-12));
        prop_assert!(close(aliased_matern_sdf(&neg, &p, delta, &cfg).unwrap(), values[1], 1e-12));
        prop_assert!(close(spde_sdf(case, &neg, alpha, delta).unwrap(), values[2], 1e-12));
    }

    #[test]
    fn tightening_tolerance_barely_moves_lattice_sum(
        dim in 1usize..=2,
        nu in 0.25f64..2.5,
        alpha in 0.05f64..2.0,
        w in prop::array::uniform2(0.0f64..0.5),
    ) {
        let p = MaternParams::unit(alpha, nu, dim).unwrap();
        let base = LatticeSumConfig::for_dim(dim);
        let a = aliased_matern_sdf(&freq(dim, w), &p, 1.0, &base).unwrap();
        let b = aliased_matern_sdf(&freq(dim, w), &p, 1.0, &base.with_rel_tol(base.rel_tol / 100.0)).unwrap();
        prop_assert!(close(a, b, base.rel_tol), "{a} vs {b}");
    }

    #[test]
    fn spde_spectrum_is_stencil_reciprocal(
        case_idx in 0usize..3,
        alpha in 0.05f64..3.0,
        delta in 0.25f64..2.0,
        w in prop::array::uniform2(0.0f64..0.5),
    ) {
        let case = SpdeCase::ALL[case_idx];
        let om = freq(case.dim(), [w[0] / delta, w[1] / delta]);
        let s = spde_stencil(case, alpha, delta).unwrap();
        let q = stencil_sdf(&s, &om, delta).unwrap();
        prop_assert!(q.im.abs() <= 1e-12 * q.re.abs());
        let d2 = delta.powi(2 * case.dim() as i32);
        prop_assert!(close(q.re * spde_sdf(case, &om, alpha, delta).unwrap(), d2, 1e-10));
    }

    #[test]
    fn covariance_is_bounded_and_decreasing(
        nu in 0.2f64..4.0,
        alpha in 0.05f64..3.0,
        sigma2 in 0.1f64..5.0,
        r in 0.0f64..20.0,
        dr in 0.01f64..2.0,
    ) {
        let p = MaternParams::new(sigma2, alpha, nu, 2).unwrap();
        let c0 = matern_cov(&[r, 0.0], &p).unwrap();
        let c1 = matern_cov(&[0.0, r + dr], &p).unwrap();
        prop_assert!(c0 <= sigma2 * (1.0 + 1e-12));
        prop_assert!(c1 <= c0 * (1.0 + 1e-12) && c1 >= 0.0);
    }

    #[test]
    fn stencil_convolution_commutes(
        a1 in 0.05f64..2.0,
        a2 in 0.05f64..2.0,
        delta in 0.25f64..2.0,
    ) {
        let s = spde_stencil(SpdeCase::D1NuHalf, a1, delta).unwrap();
        let t = spde_stencil(SpdeCase::D1NuThreeHalves, a2, delta).unwrap();
        let st = convolve(&s, &t, delta).unwrap();
        let ts = convolve(&t, &s, delta).unwrap();
        prop_assert!(st.max_abs_diff(&ts) <= 1e-12 * st.centre().abs());
    }

    #[test]
    fn remainders_stay_in_bounds(x in 1e-6f64..=1.0) {
        let (c, d) = expansion_remainders(x);
        prop_assert!(c > 0.0 && c < 1.0);
        prop_assert!(d > 0.0 && d < 3.0);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum(
        centre in prop::array::uniform3(-3.0f64..3.0),
        scale in prop::array::uniform3(0.2f64..5.0),
    ) {
        let f = |x: &[f64]| x.iter().zip(&centre).zip(&scale).map(|((v, c), s)| s * (v - c).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &[0.0, 0.0, 0.0], &NelderMeadSettings::default());
        prop_assert!(r.converged);
        for (x, c) in r.x.iter().zip(&centre) {
            prop_assert!((x - c).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn inverse_operator_reciprocal_at_every_frequency(
        dim in 1usize..=2,
        nu in 0.5f64..2.0,
        x in 1.2f64..3.0,
        delta in 0.5f64..1.5,
    ) {
        let g = if dim == 1 { GridSpec::d1(delta, 256).unwrap() } else { GridSpec::d2(delta, 128, 128).unwrap() };
        let alpha = x / delta;
        let p = MaternParams::unit(alpha, nu, dim).unwrap();
        let cfg = LatticeSumConfig::for_dim(dim);
        let spec = grid_spectrum(&p, &g, &cfg).unwrap();
        let inv = inverse_operator(&p, &g, &cfg).unwrap();
        let d2 = delta.powi(2 * dim as i32);
        for idx in (0..g.len()).step_by(7) {
            let q = stencil_sdf(&inv, &g.frequency(idx), delta).unwrap();
            prop_assert!(close(q.re * spec.values[idx], d2, 1e-9), "idx {idx}: {}", q.re * spec.values[idx]);
        }
    }

    #[test]
    fn square_root_is_real_symmetric_and_squares_to_covariance(
        nu in 0.5f64..2.5,
        x in 1.2f64..3.0,
        delta in 0.5f64..1.5,
    ) {
        let g = GridSpec::d2(delta, 64, 64).unwrap();
        let p = MaternParams::unit(x / delta, nu, 2).unwrap();
        let spec = grid_spectrum(&p, &g, &LatticeSumConfig::for_dim(2)).unwrap();
        let s = sqrt_periodic(&spec);
        let a = covariance_sequence(&spec);
        prop_assert!(s.centre() > 0.0);
        for h in [[1i64, 0], [2, 1], [3, -2], [0, 4]] {
            let v = s.get(h);
            prop_assert!((v - s.get([-h[0], -h[1]])).abs() <= 1e-14 * s.centre());
            prop_assert!((v - s.get([h[1], h[0]])).abs() <= 1e-12 * s.centre());
        }
        let st = s.to_stencil().unwrap();
        for (h, v) in st.iter() {
            prop_assert_eq!(v, st.get([-h[0], -h[1]]));
        }
        let ss = s.convolve(&s, delta * delta).unwrap();
        for h in [[0i64, 0], [1, 0], [2, 3]] {
            prop_assert!((ss.get(h) - a.get(h)).abs() <= 1e-9 * a.centre());
        }
    }
}

#[test]
fn study_is_identical_across_thread_counts() {
    let mut cfg = StudyConfig::standard(5, 3, vec![0.0, 0.1], 77).unwrap();
    cfg.embed = Some(vec![20, 20]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_sim_study(&cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.rows.len(), four.rows.len());
    for (a, b) in one.rows.iter().zip(&four.rows) {
        assert_eq!(a.micro.to_bits(), b.micro.to_bits());
        assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
    }
}
