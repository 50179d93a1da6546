mod common;

use common::*;
use mvgamma::linalg::{CorrMatrix, IndexSet, Matrix};
use mvgamma::series::{
    cdf_from_table, exp_series, expand_adaptive, expand_coefficients, mixed_partial_from_table, trace_powers,
    MultiIndex, SeriesOptions, TruncatedPolynomial, Variant,
};
use mvgamma::Shape;
use proptest::prelude::*;
use rand::Rng;

fn shape(a: f64) -> Shape {
    Shape::new(a).unwrap()
}

#[test]
fn trace_powers_hand_expansion() {
    let (a, b, d) = (0.3, -0.2, 0.1);
    let q = Matrix::from_rows(&[vec![a, b], vec![b, d]]).unwrap();
    let p = trace_powers(&q, 2);
    assert!(close(p[0].get(&MultiIndex(vec![1, 0])), a, 1e-15));
    assert!(close(p[0].get(&MultiIndex(vec![0, 1])), d, 1e-15));
    assert!(close(p[1].get(&MultiIndex(vec![2, 0])), a * a, 1e-15));
    assert!(close(p[1].get(&MultiIndex(vec![1, 1])), 2.0 * b * b, 1e-15));
    assert!(close(p[1].get(&MultiIndex(vec![0, 2])), d * d, 1e-15));
    assert!(trace_powers(&Matrix::zeros(3, 3), 4).iter().all(TruncatedPolynomial::is_empty));
}

#[test]
fn trace_power_matches_numeric_trace() {
    let mut r = rng(11);
    let q = Matrix::from_fn(3, 3, |_, _| r.random_range(-0.5..0.5)).symmetrize();
    let z = [0.3, 0.7, 0.2];
    let p4 = &trace_powers(&q, 4)[3];
    let qz = q.matmul(&Matrix::diag(&z));
    let m4 = qz.matmul(&qz).matmul(&qz).matmul(&qz);
    let tr: f64 = (0..3).map(|i| m4[(i, i)]).sum();
    assert!(close(p4.eval(&z), tr, 1e-14));
}

#[test]
fn exp_series_pointwise() {
    let p = TruncatedPolynomial::zero(2, 5);
    let e = p.exp().unwrap();
    assert_eq!(e.len(), 1);
    assert_eq!(e.get(&MultiIndex(vec![0, 0])), 1.0);

    let mut poly = TruncatedPolynomial::zero(3, 8);
    poly.add_term(MultiIndex(vec![1, 0, 0]), 0.7);
    poly.add_term(MultiIndex(vec![0, 2, 1]), -1.3);
    poly.add_term(MultiIndex(vec![1, 1, 0]), 0.4);
    poly.add_term(MultiIndex(vec![0, 0, 2]), 0.9);
    let e = poly.exp().unwrap();
    let z = [0.05, -0.04, 0.03];
    assert!(close(e.eval(&z), poly.eval(&z).exp(), 1e-6));
}

#[test]
fn trace_route_matches_determinant_route() {
    let mut g = rng(5);
    let r = random_corr(&mut g, 3, 1.0);
    let alpha = 0.8;
    let k = 9;
    let t = expand_coefficients(&r, shape(alpha), Variant::UniformC, k).unwrap();
    let e = exp_series(t.qhat(), alpha, k).unwrap();
    let pre = t.det_q().powf(alpha);
    let mut checked = 0;
    for d0 in 0..=k as u32 {
        for d1 in 0..=(k as u32 - d0) {
            for d2 in 0..=(k as u32 - d0 - d1) {
                let idx = [d0, d1, d2];
                let want = pre * e.get(&MultiIndex(idx.to_vec()));
                assert!(close(t.get(&idx), want, 1e-14 + 1e-11 * want.abs()), "{idx:?}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 220);
}

#[test]
fn degree_sums_match_eigenvalue_oracle() {
    let mut g = rng(17);
    for (n, variant) in [(2, Variant::UniformC), (3, Variant::NormalizedQ), (4, Variant::UniformC)] {
        let r = random_corr(&mut g, n, 1.5);
        for alpha in [0.5, 1.7] {
            let t = expand_coefficients(&r, shape(alpha), variant, 30).unwrap();
            let want = degree_masses(t.qhat(), alpha, t.det_q(), 30);
            for (d, w) in want.iter().enumerate() {
                assert!(close(t.degree_mass(d), *w, 1e-13), "n {n} d {d}: {} vs {w}", t.degree_mass(d));
            }
            let tail: f64 = 1.0 - want.iter().sum::<f64>();
            assert!(close(t.tail_mass(), tail, 1e-13));
        }
    }
}

#[test]
fn bivariate_normal_rectangle() {
    let r = CorrMatrix::equicorrelated(2, 0.5).unwrap();
    let t = expand_adaptive(&r, shape(0.5), &SeriesOptions::default()).unwrap();
    let v = cdf_from_table(&t, &[0.5, 0.5]).unwrap();
    assert!(close(v.value, bvn_rectangle(1.0, 0.5), 1e-6), "{v:?}");
    assert!(v.rigorous);
}

#[test]
fn cross_variant_agreement() {
    let r = CorrMatrix::equicorrelated(3, 0.3).unwrap();
    let a = expand_coefficients(&r, shape(1.0), Variant::UniformC, 50).unwrap();
    let b = expand_coefficients(&r, shape(1.0), Variant::NormalizedQ, 50).unwrap();
    let va = cdf_from_table(&a, &[1.0; 3]).unwrap().value;
    let vb = cdf_from_table(&b, &[1.0; 3]).unwrap().value;
    assert!(close(va, vb, 1e-6), "{va} vs {vb}");
}

#[test]
fn saturation() {
    let r = CorrMatrix::equicorrelated(3, 0.4).unwrap();
    let t = expand_coefficients(&r, shape(2.0), Variant::UniformC, 24).unwrap();
    let v = cdf_from_table(&t, &[1e3; 3]).unwrap().value;
    assert!(close(v, 1.0 - t.tail_mass(), 1e-9));
}

#[test]
fn density_matches_finite_difference() {
    let t = expand_coefficients(&CorrMatrix::identity(1), shape(0.7), Variant::UniformC, 60).unwrap();
    let h = 1e-5;
    let fd = (cdf_from_table(&t, &[1.0 + h]).unwrap().value - cdf_from_table(&t, &[1.0 - h]).unwrap().value) / (2.0 * h);
    let m = mixed_partial_from_table(&t, &[1.0], &IndexSet::full(1)).unwrap();
    assert!(close(m, fd, 1e-6));
    let none = mixed_partial_from_table(&t, &[1.0], &IndexSet::empty()).unwrap();
    assert_eq!(none, cdf_from_table(&t, &[1.0]).unwrap().value);
}

#[test]
fn mixed_partial_matches_second_difference() {
    let mut g = rng(23);
    let r = random_infdiv(&mut g, 3, 0.6, true);
    let t = expand_adaptive(&r, shape(1.0), &SeriesOptions::default()).unwrap();
    assert!(t.converged());
    let x = [0.9, 1.3, 0.7];
    let h = 1e-3;
    let f = |d1: f64, d3: f64| cdf_from_table(&t, &[x[0] + d1, x[1], x[2] + d3]).unwrap().value;
    let fd = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    let m = mixed_partial_from_table(&t, &x, &IndexSet::new(vec![0, 2]).unwrap()).unwrap();
    assert!(close(m, fd, 1e-5), "{m} vs {fd}");
}

#[test]
fn normalized_variant_reports_convergence_risk() {
    // R⁻¹ normalized has a spectral radius above one for strong negative dependence
    let r = CorrMatrix::equicorrelated(4, -0.3).unwrap();
    match expand_coefficients(&r, shape(1.0), Variant::NormalizedQ, 10) {
        Err(mvgamma::Error::ConvergenceRisk { norm }) => assert!(norm >= 1.0),
        Ok(t) => assert!(t.qhat_norm() < 1.0 && !t.rigorous()),
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn non_inf_div_table_is_flagged() {
    let t = expand_adaptive(&block4(0.5), shape(0.5), &SeriesOptions::with_variant(Variant::NormalizedQ)).unwrap();
    assert!(!t.infinitely_divisible());
    assert!(!cdf_from_table(&t, &[1.0; 4]).unwrap().rigorous);
}

fn corr_strategy(n: usize) -> impl Strategy<Value = CorrMatrix> {
    (any::<u64>(), 0.5f64..2.0).prop_map(move |(seed, s)| random_corr(&mut rng(seed), n, s))
}

fn infdiv_strategy(n: usize) -> impl Strategy<Value = CorrMatrix> {
    (any::<u64>(), 0.4f64..1.5, any::<bool>()).prop_map(move |(seed, s, f)| random_infdiv(&mut rng(seed), n, s, f))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_holds(r in corr_strategy(3), alpha in 0.3f64..3.0, k in 0usize..25) {
        let t = expand_coefficients(&r, shape(alpha), Variant::UniformC, k).unwrap();
        let total: f64 = (0..=k).map(|d| t.degree_mass(d)).sum();
        prop_assert!((total + t.tail_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infdiv_coefficients_nonnegative(r in infdiv_strategy(3), alpha in 0.3f64..3.0) {
        for v in [Variant::UniformC, Variant::NormalizedQ] {
            let t = expand_coefficients(&r, shape(alpha), v, 20).unwrap();
            prop_assert!(t.infinitely_divisible());
            prop_assert!(t.min_coefficient() >= -1e-12, "{:?}: {}", v, t.min_coefficient());
        }
    }

    #[test]
    fn cdf_monotone_in_each_coordinate(r in infdiv_strategy(3), j in 0usize..3) {
        let t = expand_adaptive(&r, shape(1.0), &SeriesOptions::default()).unwrap();
        let mut x = vec![1.0; 3];
        let mut prev = 0.0;
        for step in 1..8 {
            x[j] = 0.4 * step as f64;
            let v = cdf_from_table(&t, &x).unwrap().value;
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn variants_agree(r in infdiv_strategy(4), seed in any::<u64>()) {
        let mut g = rng(seed);
        let x: Vec<f64> = (0..4).map(|_| g.random_range(0.3..3.0)).collect();
        let a = expand_adaptive(&r, shape(0.5), &SeriesOptions::default()).unwrap();
        let b = expand_adaptive(&r, shape(0.5), &SeriesOptions::with_variant(Variant::NormalizedQ)).unwrap();
        let va = cdf_from_table(&a, &x).unwrap();
        let vb = cdf_from_table(&b, &x).unwrap();
        let tol = 1e-6f64.max(va.error + vb.error);
        prop_assert!((va.value - vb.value).abs() <= tol, "{} vs {}", va.value, vb.value);
    }
}
