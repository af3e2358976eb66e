use std::sync::Arc;

use gridopt::gex::{run_gex, GexConfig};
use gridopt::info::{information_matrix, relative_efficiency};
use gridopt::solver::{grp_pooling, optimize_weights, SolverConfig};
use gridopt::{Design, DesignPoint, FactorGrid, GlmFamily, Model};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[path = "common/oracle.rs"]
mod oracle;

fn poly_model(m: usize, fam: Option<(GlmFamily, Vec<f64>)>) -> Model {
    let h = Arc::new(|x: &[f64], f: &mut [f64]| {
        for (j, fj) in f.iter_mut().enumerate() {
            *fj = x[0].powi(j as i32);
        }
    });
    match fam {
        None => Model::linear("poly", 1, m, h).unwrap(),
        Some((f, theta)) => Model::new("poly-glm", gridopt::models::GlmModel::new(f, 1, h, theta)).unwrap(),
    }
}

fn family() -> impl Strategy<Value = Option<GlmFamily>> {
    prop_oneof![
        Just(None),
        Just(Some(GlmFamily::Logistic)),
        Just(Some(GlmFamily::Probit)),
        Just(Some(GlmFamily::Poisson)),
    ]
}

/// Sorted distinct levels in [-1, 1].
fn levels(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-100i32..=100, n).prop_map(|s| s.into_iter().map(|v| v as f64 / 100.0).collect())
}

fn points(levels: &[f64]) -> Vec<DesignPoint> {
    levels.iter().map(|&x| DesignPoint::new(vec![x])).collect()
}

fn max_variance(design: &Design, model: &Model, pts: &[DesignPoint]) -> f64 {
    let mi = information_matrix(design, model).unwrap();
    pts.iter()
        .map(|p| mi.variance(&model.regression_vec(p.coords()).unwrap()).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn oracle_reproduces_known_optima() {
    let line = |xs: &[f64], m: usize| -> Vec<Vec<f64>> {
        xs.iter().map(|&x| (0..m).map(|j| x.powi(j as i32)).collect()).collect()
    };
    assert!((oracle::mesh_optimum(&line(&[-1.0, 0.0, 1.0], 2), 200) - 1.0).abs() < 1e-12);
    let exact = (4.0f64 / 27.0).cbrt();
    let mesh = oracle::mesh_optimum(&line(&[-1.0, 0.0, 1.0], 3), 200);
    assert!(mesh <= exact && mesh >= exact * (1.0 - 1e-4));
    assert_eq!(oracle::mesh_optimum(&[vec![0.5], vec![-2.0]], 200), 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_match_the_mesh_oracle(
        m in 2usize..=3,
        n_small in 3usize..=5,
        n_large in 3usize..=20,
        fam in family(),
        theta in prop::collection::vec(-1.5f64..1.5, 3),
        lv in levels(20),
        seed in any::<u64>(),
    ) {
        let n = if m == 3 { n_small } else { n_large };
        let lv = &lv[..n];
        let pts = points(lv);
        let model = poly_model(m, fam.map(|f| (f, theta[..m].to_vec())));
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        let out = optimize_weights(&pts, &model, &Design::uniform(pts.clone()).unwrap(), &cfg).unwrap();
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| model.regression_vec(p.coords()).unwrap()).collect();
        let best = oracle::mesh_optimum(&rows, 200);
        prop_assert!((out.phi - best).abs() <= 1e-4 * best, "{} vs {}", out.phi, best);

        prop_assert!(out.certified);
        prop_assert!(m as f64 / max_variance(&out.design, &model, &pts) >= cfg.eff_opt);
        for w in out.trace.windows(2) {
            prop_assert!(w[1].phi >= w[0].phi - 1e-12, "{:?}", w);
        }
    }

    #[test]
    fn pooling_keeps_the_efficiency_floor(
        fam in family(),
        theta in prop::collection::vec(-1.0f64..1.0, 6),
        eff_grp in prop::sample::select(vec![0.5, 0.9, 0.99, 1.0 - 1e-3, 1.0 - 1e-6, 1.0]),
        seed in any::<u64>(),
    ) {
        let lv: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
        let pts: Vec<DesignPoint> = lv
            .iter()
            .flat_map(|&a| [-1.0, -0.3, 0.4, 1.0].into_iter().map(move |b| DesignPoint::new(vec![a, b])))
            .collect();
        let h = Arc::new(|x: &[f64], f: &mut [f64]| {
            f.copy_from_slice(&[1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[0].powi(3)]);
        });
        let model = match fam {
            None => Model::linear("cubic", 2, 6, h).unwrap(),
            Some(f) => Model::new("cubic-glm", gridopt::models::GlmModel::new(f, 2, h, theta)).unwrap(),
        };
        let cfg = SolverConfig { eff_grp, seed, ..SolverConfig::default() };
        let out = optimize_weights(&pts, &model, &Design::uniform(pts.clone()).unwrap(), &cfg).unwrap();
        let pooled = grp_pooling(&out.design, &model, &[2.0, 2.0], &cfg).unwrap();
        prop_assert!(pooled.len() <= out.design.len());
        prop_assert!(relative_efficiency(&pooled, &out.design, &model).unwrap() >= eff_grp);
    }
}

fn random_r(m: usize, entries: &[f64]) -> Option<DMatrix<f64>> {
    let r = DMatrix::from_fn(m, m, |i, j| entries[i * m + j]);
    (r.clone().lu().determinant().abs() > 0.05).then_some(r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reparametrization_keeps_the_argmax(
        m in 2usize..=4,
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        seed in any::<u64>(),
    ) {
        let r = random_r(m, &entries);
        prop_assume!(r.is_some());
        let grid = FactorGrid::new(vec![(0..=20).map(|i| -1.0 + 0.1 * i as f64).collect()]).unwrap();
        let model = poly_model(m, None);
        // Weights are only pinned to about the square root of the efficiency gap.
        let cfg = GexConfig { seed, n_rnd: 10, n_loc: 10, eff_opt: 1.0 - 1e-14, eff_grp: 1.0 - 1e-9, ..GexConfig::default() };
        let plain = run_gex(&grid, &model, &cfg).unwrap();
        let other = run_gex(&grid, &model.reparametrized(&r.unwrap()).unwrap(), &cfg).unwrap();
        prop_assert_eq!(plain.design.points(), other.design.points());
        for (a, b) in plain.design.weights().iter().zip(other.design.weights()) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn gex_rounds_are_monotone_and_deterministic(
        fam in family(),
        theta in prop::collection::vec(-1.0f64..1.0, 6),
        n1 in 3usize..40,
        n2 in 2usize..40,
        seed in any::<u64>(),
    ) {
        let axis = |n: usize| (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
        let grid = FactorGrid::new(vec![axis(n1), axis(n2)]).unwrap();
        let h = Arc::new(|x: &[f64], f: &mut [f64]| {
            f.copy_from_slice(&[1.0, x[0], x[1], x[0] * x[0], x[0] * x[1]]);
        });
        let model = match fam {
            None => Model::linear("quad", 2, 5, h).unwrap(),
            Some(f) => Model::new("quad-glm", gridopt::models::GlmModel::new(f, 2, h, theta[..5].to_vec())).unwrap(),
        };
        let cfg = GexConfig { seed, n_rnd: 50, n_loc: 10, ..GexConfig::default() };
        let out = run_gex(&grid, &model, &cfg).unwrap();
        for w in out.report.rounds.windows(2) {
            prop_assert!(w[1].phi >= w[0].phi, "{:?}", w);
        }
        prop_assert!(out.design.points().iter().all(|p| grid.contains(p)));
        let again = run_gex(&grid, &model, &cfg).unwrap();
        prop_assert_eq!(&out.design, &again.design);
    }
}
