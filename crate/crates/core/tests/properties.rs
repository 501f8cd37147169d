use nalgebra::DMatrix;
use proptest::prelude::*;
use setinv::certify::{dyson_drift, range_test, score_infinite, RangeSolver, DEFAULT_S_MAX};
use setinv::eigen::EigenPair;
use setinv::pde::{
    carre_du_champ_check, feynman_kac_point, h_rect_series, vandermonde, Grid, Polynomial,
    RectSeries,
};
use setinv::problem::{
    sigma_to_sigma_tensor, validate_spec, Domain, Drift, DynamicsField, Horizon, MatrixSpec,
    ProblemSpec, Region,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn matrix(n: usize, m: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, j| v[i * m + j])
}

fn ordered3() -> impl Strategy<Value = [f64; 3]> {
    (-3.0..3.0f64, 0.05..2.0f64, 0.05..2.0f64).prop_map(|(a, d1, d2)| [a, a + d1, a + d1 + d2])
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn classification_partitions_samples(u in prop::collection::vec(0.0..1.0f64, 3)) {
        let domains = [
            Domain::rect(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(),
            Domain::disk([0.0, 0.0], 2.0).unwrap(),
            Domain::annulus(1.0, 2.0).unwrap(),
            Domain::weyl(3).unwrap(),
        ];
        for d in &domains {
            let bb = d.bounding_box();
            let x: Vec<f64> = (0..bb.dim()).map(|a| bb.lower[a] + u[a] * (bb.upper[a] - bb.lower[a])).collect();
            let r = d.classify(&x, d.default_tolerance()).unwrap();
            let sd = d.signed_distance(&x);
            match r {
                Region::Interior => prop_assert!(sd > 0.0),
                Region::Boundary => prop_assert!(sd.abs() <= d.default_tolerance()),
                Region::Exterior => prop_assert!(sd < 0.0),
            }
        }
    }

    #[test]
    fn sigma_tensor_is_symmetric_psd(v in prop::collection::vec(-2.0..2.0f64, 6)) {
        let rows: Vec<Vec<f64>> = v.chunks(2).map(|c| c.to_vec()).collect();
        let d = DynamicsField::new(3, Drift::Zero, MatrixSpec::identity(), MatrixSpec::Rows(rows)).unwrap();
        let s = sigma_to_sigma_tensor(&d, 0.0, &[0.0; 3]).unwrap();
        prop_assert_eq!((&s - s.transpose()).amax(), 0.0);
        let min = s.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-12);
    }

    #[test]
    fn series_values_are_probabilities(tau in 1e-3..5.0f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let s = RectSeries::new(vec![3.0, 2.0], vec![1.0, 2.0]).unwrap();
        let h = s.value(tau, &[3.0 * x, 2.0 * y]).unwrap();
        prop_assert!((0.0..=1.0 + 1e-6).contains(&h));
    }

    #[test]
    fn survival_shrinks_with_time_to_go(x in 0.05..0.95f64, a in 1e-3..2.0f64, b in 1e-3..2.0f64) {
        let (short, long) = if a < b { (a, b) } else { (b, a) };
        let h = |tau: f64| h_rect_series(&[1.0], &[1.0], 5.0, 5.0 - tau, &[x], 400).unwrap();
        prop_assert!(h(long) <= h(short) + 1e-12);
    }

    #[test]
    fn vandermonde_is_harmonic(x in ordered3()) {
        // V is quadratic in each coordinate, so central second differences
        // are exact and their sum vanishes up to rounding.
        let step = 1e-2;
        let v0 = vandermonde(&x).unwrap();
        let (mut lap, mut mag) = (0.0, 0.0);
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += step;
            m[i] -= step;
            let (vp, vm) = (vandermonde(&p).unwrap(), vandermonde(&m).unwrap());
            lap += vp - 2.0 * v0 + vm;
            mag += vp.abs() + 2.0 * v0.abs() + vm.abs();
        }
        prop_assert!(lap.abs() <= 16.0 * f64::EPSILON * mag, "{lap} vs {mag}");
    }

    #[test]
    fn dyson_drift_matches_log_vandermonde(x in ordered3()) {
        let u = dyson_drift(&x).unwrap();
        let logv = |y: &[f64; 3]| vandermonde(y).unwrap().abs().ln();
        let gap = (x[1] - x[0]).min(x[2] - x[1]);
        for i in 0..3 {
            let step = 1e-6 * gap;
            let mut p = x;
            let mut m = x;
            p[i] += step;
            m[i] -= step;
            let fd = (logv(&p) - logv(&m)) / (2.0 * step);
            prop_assert!((fd - u[i]).abs() <= 1e-8 * u[i].abs().max(1.0), "{fd} vs {}", u[i]);
        }
    }

    #[test]
    fn min_norm_solution_beats_nullspace_shifts(
        g in prop::collection::vec(-2.0..2.0f64, 6),
        c in prop::collection::vec(-2.0..2.0f64, 3),
        w in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let g = matrix(2, 3, &g);
        let s: Vec<f64> = (0..2).map(|i| (0..3).map(|j| g[(i, j)] * c[j]).sum()).collect();
        let t = range_test(&g, &s, 1e-6).unwrap();
        prop_assert!(t.in_range);
        let solver = RangeSolver::new(&g).unwrap();
        let ns = solver.nullspace();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for k in 0..ns.ncols() {
            let shifted: Vec<f64> = (0..3).map(|j| t.u[j] + w[k] * ns[(j, k)]).collect();
            prop_assert!(norm(&shifted) >= norm(&t.u) - 1e-12);
        }
    }

    #[test]
    fn score_is_gauge_invariant(c in 0.1..100.0f64) {
        let grid = Grid::for_domain(&Domain::rect(vec![0.0], vec![1.0]).unwrap(), &[20]).unwrap();
        let psi: Vec<f64> = grid.interior_nodes().iter().map(|&p| (std::f64::consts::PI * grid.coords(p)[0]).sin()).collect();
        let d = DynamicsField::brownian(1);
        let pair = |scale: f64| EigenPair { lambda: 4.9, psi: psi.iter().map(|v| v * scale).collect(), residual: 0.0, iterations: 1 };
        let a = score_infinite(&pair(1.0), &grid, &d, 1e-12, DEFAULT_S_MAX).unwrap();
        let b = score_infinite(&pair(c), &grid, &d, 1e-12, DEFAULT_S_MAX).unwrap();
        for p in 0..grid.node_count() {
            let (u, v) = (a.node_value(0, p)[0], b.node_value(0, p)[0]);
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn carre_du_champ_is_drift_independent(
        l in prop::collection::vec(-1.0..1.0f64, 9),
        a in prop::collection::vec(-2.0..2.0f64, 9),
        c in prop::collection::vec(-2.0..2.0f64, 3),
        p in prop::collection::vec(-2.0..2.0f64, 13),
        q in prop::collection::vec(-2.0..2.0f64, 13),
        x in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let lm = matrix(3, 3, &l);
        let sigma = &lm * lm.transpose() + DMatrix::identity(3, 3) * 0.1;
        let quad = |v: &[f64]| Polynomial::quadratic(v[0], &v[1..4], &matrix(3, 3, &v[4..13])).unwrap();
        let (phi, psi) = (quad(&p), quad(&q));
        let (lhs, rhs) = carre_du_champ_check(&sigma, &matrix(3, 3, &a), &c, &phi, &psi, &x).unwrap();
        let (lhs0, _) = carre_du_champ_check(&sigma, &DMatrix::zeros(3, 3), &[0.0; 3], &phi, &psi, &x).unwrap();
        let scale = rhs.abs().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * 100.0, "{lhs} vs {rhs}");
        prop_assert!((lhs - lhs0).abs() <= 1e-12 * scale * 100.0);
    }

    #[test]
    fn range_verdict_matches_rank_oracle(
        m in 1usize..4,
        rank in 0usize..4,
        f in prop::collection::vec(-1.0..1.0f64, 9),
        h in prop::collection::vec(-1.0..1.0f64, 9),
        s in prop::collection::vec(-3.0..3.0f64, 3),
        in_range in any::<bool>(),
    ) {
        // G = F H with F 3xr, H rxm gives rank min(r, m) almost surely.
        let r = rank.min(m);
        let g = if r == 0 {
            DMatrix::zeros(3, m)
        } else {
            matrix(3, r, &f[..3 * r]) * matrix(r, m, &h[..r * m])
        };
        let s: Vec<f64> = if in_range {
            let c = DMatrix::from_column_slice(m, 1, &s[..m]);
            (&g * c).iter().copied().collect()
        } else {
            s
        };
        let t = range_test(&g, &s, 1e-6).unwrap();
        let cutoff = |mat: &DMatrix<f64>| {
            let sv = mat.clone().svd(false, false).singular_values;
            let max = sv.max();
            sv.iter().filter(|&&v| v > 1e-8 * max && v > 0.0).count()
        };
        let mut aug = DMatrix::zeros(3, m + 1);
        aug.view_mut((0, 0), (3, m)).copy_from(&g);
        for i in 0..3 {
            aug[(i, m)] = s[i];
        }
        let oracle = cutoff(&aug) == cutoff(&g);
        prop_assert_eq!(t.in_range, oracle, "G = {}, s = {:?}, residual {}", g, s, t.residual);
    }
}

#[test]
fn validation_is_pure() {
    let spec = ProblemSpec::new(
        DynamicsField::spring_damper(1.0, 1.0).unwrap(),
        Domain::rect(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
        None,
        Horizon::Finite { t: 1.0 },
        vec![1.0, 1.0],
    )
    .unwrap();
    assert_eq!(
        validate_spec(&spec, 200, 1e-9, 3),
        validate_spec(&spec, 200, 1e-9, 3)
    );
}

#[test]
fn monte_carlo_is_reproducible() {
    let spec = ProblemSpec::new(
        DynamicsField::brownian(2),
        Domain::disk([0.0, 0.0], 2.0).unwrap(),
        Some(Domain::annulus(1.0, 2.0).unwrap()),
        Horizon::Finite { t: 1.0 },
        vec![1.5, 0.0],
    )
    .unwrap();
    let a = feynman_kac_point(&spec, 0.0, &[1.2, 0.3], 500, 1e-3, 11).unwrap();
    let b = feynman_kac_point(&spec, 0.0, &[1.2, 0.3], 500, 1e-3, 11).unwrap();
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1.to_bits(), b.1.to_bits());
}
