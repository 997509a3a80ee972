mod common;

use common::simpson_extrapolated;
use nljm::hamiltonian::*;
use nljm::quadrature::gauss_rule;
use nljm::specfun::laguerre_normalized;
use proptest::prelude::*;

fn exp_potential() -> Potential {
    Potential::PowerExponential { strength: 7.5, power: 2.0, decay: 1.0 }
}

/// (ΛWΛᵀ)_{i,j} for ℓ = 0 by ∫ V(√x/λ) e^{−x} L̃_i L̃_j dx with x = t².
fn potential_oracle(v: &Potential, lambda: f64, i: usize, j: usize) -> f64 {
    simpson_extrapolated(
        |t| 2.0 * t * v.eval(t / lambda) * (-t * t).exp() * laguerre_normalized(i, 0, t * t) * laguerre_normalized(j, 0, t * t),
        0.0,
        16.0,
        64_000,
    )
}

#[test]
fn potential_element_matches_adaptive_oracle() {
    let v = exp_potential();
    let rule = gauss_rule(300, 0).unwrap();
    let m = potential_matrix(&v, 1.0, &rule, 4).unwrap();
    let want = potential_oracle(&v, 1.0, 0, 0);
    assert!((m[(0, 0)] - want).abs() < 1e-6, "{} vs {want}", m[(0, 0)]);
}

#[test]
fn potential_matrix_accurate_across_lambda_range() {
    let v = exp_potential();
    let rule = gauss_rule(200, 0).unwrap();
    for &lambda in &[0.8, 0.9, 1.0, 1.1, 1.25] {
        let m = potential_matrix(&v, lambda, &rule, 10).unwrap();
        for &(i, j) in &[(0, 0), (0, 1), (1, 1), (3, 5), (9, 9)] {
            let want = potential_oracle(&v, lambda, i, j);
            assert!((m[(i, j)] - want).abs() < 1e-5, "λ={lambda} ({i},{j}): {} vs {want}", m[(i, j)]);
        }
    }
}

#[test]
fn zero_potential_gives_free_matrix() {
    let v = Potential::PowerExponential { strength: 0.0, power: 2.0, decay: 1.0 };
    let rule = gauss_rule(40, 1).unwrap();
    let h = assemble_linear(1.3, 1, 12, &v, &rule).unwrap();
    assert_eq!(h.matrix, FreeMatrixCoeffs::new(1.3, 1).matrix(12));
}

proptest! {
    #[test]
    fn f_weight_symmetric(n in 1usize..=3, ell in 0usize..=3, i in 0usize..25, j in 0usize..25) {
        let a = f_weight_analytic(n, ell, i, j).unwrap();
        let b = f_weight_analytic(n, ell, j, i).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn f_weight_analytic_matches_quadrature(n in 1usize..=2, ell in 0usize..=2, i in 0usize..=10, j in 0usize..=10) {
        let rule = gauss_rule(60, ell).unwrap();
        let a = f_weight_analytic(n, ell, i, j).unwrap();
        let q = f_weight_quadrature(n, ell, i, j, &rule);
        prop_assert!((a - q).abs() < 1e-10, "{} vs {}", a, q);
    }

    #[test]
    fn piecewise_matrix_symmetric(lambda in 0.5f64..2.0) {
        let v = Potential::PiecewiseLinear {
            segments: vec![
                Segment { start: 0.0, end: 1.2, intercept: 0.0, slope: 2.0 },
                Segment { start: 1.2, end: 3.0, intercept: 2.4, slope: 0.0 },
                Segment { start: 3.0, end: 7.0, intercept: 4.2, slope: -0.6 },
            ],
        };
        let rule = gauss_rule(100, 1).unwrap();
        let m = potential_matrix(&v, lambda, &rule, 20).unwrap();
        prop_assert!((&m - m.transpose()).amax() < 1e-12);
    }
}

#[test]
fn stability_scan_finds_default_on_plateau() {
    let rows = stability_scan(1, 0, &exp_potential(), &[0.8, 1.0, 1.25], &[10, 20], 100, 1e-3).unwrap();
    assert_eq!(rows.len(), 6);
    let cell = rows.iter().find(|r| r.lambda == 1.0 && r.size == 20).unwrap();
    assert!(cell.plateau, "{cell:?}");
    assert!(rows.windows(2).all(|w| (w[0].lambda, w[0].size) <= (w[1].lambda, w[1].size)));
}

#[test]
fn stability_scan_single_point_and_validation() {
    let rows = stability_scan(2, 1, &exp_potential(), &[1.0], &[8], 30, 1e-3).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].quad_order, 30.max(nljm::linearize::recommended_quadrature_order(2, 8)));
    let bad = Potential::PowerExponential { strength: 1.0, power: 1.0, decay: -1.0 };
    assert!(stability_scan(1, 0, &bad, &[1.0], &[4], 10, 1e-3).is_err());
}
