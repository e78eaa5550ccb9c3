use std::path::PathBuf;

use approx::assert_relative_eq;
use clot_core::experiments::{
    generate_grouping, replication_rng, run_grouping_paths, run_scaling, run_study, GroupingFixture, ScalingFixture,
    ScenarioConfig, StudyReport,
};
use clot_core::grouping::{grouping_check, preprocess};
use clot_core::matrices::{devore_matrix, test_matrix, DeVoreParams, TestMatrix};
use clot_core::optimality::lagrangian_kkt_residual;
use clot_core::rip::exact_rip;
use clot_core::solvers::{
    log_grid_desc, solution_path, solve_constrained, solve_lagrangian, solve_lagrangian_from,
};
use clot_core::{LambdaSide, Partition, Problem, RegularizerSpec, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_problem(m: usize, n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, n, |_, _| gauss(&mut rng));
    let y = DVector::from_fn(m, |_, _| gauss(&mut rng));
    (a, y)
}

fn specs(n: usize) -> Vec<RegularizerSpec> {
    let part = Partition::contiguous(&[n / 2, n - n / 2]).unwrap();
    vec![
        RegularizerSpec::l1(),
        RegularizerSpec::clot(0.3),
        RegularizerSpec::elastic_net(0.6),
        RegularizerSpec::group_lasso(part.clone()),
        RegularizerSpec::sparse_group_lasso(0.4, part),
    ]
}

#[test]
fn lagrangian_solutions_pass_independent_kkt_check() {
    let (a, y) = random_problem(15, 30, 1);
    let opts = SolverOptions::default();
    for spec in specs(30) {
        for side in [LambdaSide::OnPenalty, LambdaSide::OnLoss] {
            let template = Problem::lagrangian(a.clone(), y.clone(), 1.0, LambdaSide::OnPenalty).unwrap();
            let lmax = template.lambda_max(&spec).unwrap();
            let lambda = match side {
                LambdaSide::OnPenalty => 0.1 * lmax,
                LambdaSide::OnLoss => 10.0 / lmax,
            };
            let p = Problem::lagrangian(a.clone(), y.clone(), lambda, side).unwrap();
            let r = solve_lagrangian(&p, &spec, &opts).unwrap();
            assert!(r.converged, "{:?} {:?}", spec.kind, side);
            let kkt = lagrangian_kkt_residual(&a, &y, &spec, lambda, side, &r.x_hat).unwrap();
            assert!(kkt <= 1e-7, "{:?} {:?}: {kkt}", spec.kind, side);

            // objective recomputed from x̂, and no worse than at 0
            let x = DVector::from_column_slice(&r.x_hat);
            let (wl, wp) = match side {
                LambdaSide::OnPenalty => (1.0, lambda),
                LambdaSide::OnLoss => (lambda, 1.0),
            };
            let obj = wl * (&y - &a * &x).norm_squared() + wp * spec.eval(&r.x_hat).unwrap();
            assert_relative_eq!(obj, r.objective, max_relative = 1e-10);
            assert!(r.objective <= wl * y.norm_squared() + 1e-12);
        }
    }
}

#[test]
fn lagrangian_objective_beats_truth() {
    let (a, _) = random_problem(25, 40, 2);
    let mut x = DVector::zeros(40);
    x[3] = 1.5;
    x[20] = -2.0;
    let y = &a * &x;
    let spec = RegularizerSpec::clot(0.2);
    let lambda = 0.5;
    let p = Problem::lagrangian(a.clone(), y.clone(), lambda, LambdaSide::OnPenalty).unwrap();
    let r = solve_lagrangian(&p, &spec, &SolverOptions::default()).unwrap();
    let at_truth = lambda * spec.eval(x.as_slice()).unwrap();
    assert!(r.objective <= at_truth + 1e-10);
}

#[test]
fn constrained_solutions_are_feasible() {
    let (a, y) = random_problem(20, 50, 3);
    let opts = SolverOptions::default();
    for spec in specs(50) {
        for eps in [0.0, 0.05 * y.norm(), 0.5 * y.norm()] {
            let p = Problem::constrained(a.clone(), y.clone(), eps).unwrap();
            let r = solve_constrained(&p, &spec, &opts).unwrap();
            let limit = if eps > 0.0 { eps * (1.0 + 1e-6) } else { 1e-9 * y.norm() };
            assert!(r.residual_l2 <= limit, "{:?} eps={eps}: {}", spec.kind, r.residual_l2);
            let recomputed = (&a * DVector::from_column_slice(&r.x_hat) - &y).norm();
            assert_relative_eq!(recomputed, r.residual_l2, max_relative = 1e-8, epsilon = 1e-14);
        }
    }
}

#[test]
fn constrained_penalty_is_minimal_among_feasible_perturbations() {
    let (a, y) = random_problem(10, 25, 4);
    let spec = RegularizerSpec::clot(0.5);
    let r = solve_constrained(&Problem::constrained(a.clone(), y.clone(), 0.0).unwrap(), &spec, &SolverOptions::default())
        .unwrap();
    // null-space moves keep feasibility
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = nalgebra::SVD::new(a.transpose() * &a, true, false).u.unwrap();
    let base = r.objective;
    for _ in 0..200 {
        let mut z = DVector::from_column_slice(&r.x_hat);
        for j in 10..25 {
            z += u.column(j) * (0.1 * gauss(&mut rng));
        }
        assert!(spec.eval(z.as_slice()).unwrap() >= base * (1.0 - 1e-8));
    }
}

#[test]
fn homogeneous_penalties_scale_equivariantly() {
    let a = test_matrix(TestMatrix::Gaussian { seed: 12 }, 15, 60).unwrap();
    let mut x = DVector::zeros(60);
    x[0] = 1.0;
    x[33] = -0.7;
    let y = &a * &x;
    let opts = SolverOptions::default();
    for spec in specs(60).into_iter().filter(|s| s.is_homogeneous()) {
        let base = solve_constrained(&Problem::constrained(a.clone(), y.clone(), 0.0).unwrap(), &spec, &opts).unwrap();
        let bv = DVector::from_column_slice(&base.x_hat);
        for c in [10.0, 100.0, 1000.0] {
            let r = solve_constrained(&Problem::constrained(a.clone(), &y * c, 0.0).unwrap(), &spec, &opts).unwrap();
            let rel = (DVector::from_column_slice(&r.x_hat) - &bv * c).norm() / (c * bv.norm());
            assert!(rel <= 1e-6, "{:?} c={c}: {rel}", spec.kind);
        }
    }
}

#[test]
fn clot_scaling_holds_on_a_gaussian_instance() {
    // m < n/4, independent of the DeVore construction
    let a = test_matrix(TestMatrix::Gaussian { seed: 21 }, 40, 200).unwrap();
    let mut x = DVector::zeros(200);
    x[0] = 0.8147;
    x[1] = 0.9058;
    x[2] = 0.1270;
    let spec = RegularizerSpec::clot(0.2);
    for c in 0..=4 {
        let truth = &x * 10f64.powi(c);
        let p = Problem::constrained(a.clone(), &a * &truth, 0.0).unwrap();
        let r = solve_constrained(&p, &spec, &SolverOptions::default()).unwrap();
        let rel = (DVector::from_column_slice(&r.x_hat) - &truth).norm() / truth.norm();
        assert!(rel <= 1e-6, "c={c}: {rel}");
    }
}

#[test]
fn small_scaling_preset_separates_clot_and_en() {
    let report = run_scaling(
        &ScalingFixture::small(),
        &clot_core::experiments::default_scaling_methods(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!((report.m, report.n), (121, 1000));
    for c in 0..=4 {
        assert!(report.row("clot", c).unwrap().relative_error <= 1e-3);
    }
    assert!((0..=3).any(|c| report.row("en", c).unwrap().relative_error > 0.1));
}

#[test]
fn warm_and_cold_paths_agree() {
    let (a, y) = random_problem(20, 30, 6);
    let spec = RegularizerSpec::clot(0.4);
    let template = Problem::lagrangian(a.clone(), y.clone(), 1.0, LambdaSide::OnPenalty).unwrap();
    let lmax = template.lambda_max(&spec).unwrap();
    let grid = log_grid_desc(1.5 * lmax, 1e-3 * lmax, 15);
    let opts = SolverOptions::default();
    let path = solution_path(&template, &spec, &grid, &opts).unwrap();
    assert!(path[0].result.as_ref().unwrap().x_hat.iter().all(|v| *v == 0.0));
    for point in &path {
        let warm = point.result.as_ref().unwrap();
        let p = Problem::lagrangian(a.clone(), y.clone(), point.lambda, LambdaSide::OnPenalty).unwrap();
        let cold = solve_lagrangian_from(&p, &spec, &opts, None).unwrap();
        let diff = warm.x_hat.iter().zip(&cold.x_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "λ = {}: {diff}", point.lambda);
    }
}

#[test]
fn lambda_above_threshold_gives_zero_for_every_spec() {
    let (a, y) = random_problem(12, 20, 7);
    for spec in specs(20) {
        let template = Problem::lagrangian(a.clone(), y.clone(), 1.0, LambdaSide::OnPenalty).unwrap();
        let lmax = template.lambda_max(&spec).unwrap();
        let p = Problem::lagrangian(a.clone(), y.clone(), lmax * 1.01, LambdaSide::OnPenalty).unwrap();
        let r = solve_lagrangian(&p, &spec, &SolverOptions::default()).unwrap();
        assert!(r.x_hat.iter().all(|v| *v == 0.0), "{:?}", spec.kind);
        let below = Problem::lagrangian(a.clone(), y.clone(), lmax * 0.9, LambdaSide::OnPenalty).unwrap();
        let r = solve_lagrangian(&below, &spec, &SolverOptions::default()).unwrap();
        assert!(r.x_hat.iter().any(|v| *v != 0.0), "{:?}", spec.kind);
    }
}

#[test]
fn grouping_fixture_paths_show_proportionality() {
    let config: ScenarioConfig = serde_json::from_str(
        r#"{"name":"g","generator":{"kind":"grouping_fixture","m":100},"seed":7,
            "methods":[{"name":"clot","kind":"clot","mu":0.5},{"name":"en","kind":"en","mu":0.5},{"name":"lasso","kind":"l1"}]}"#,
    )
    .unwrap();
    let report = run_grouping_paths(&config).unwrap();
    for s in &report.series {
        assert!(s.coefficients[0].iter().all(|v| *v == 0.0));
        let spreads = s.proportionality();
        // middle third of the grid, on a log scale
        let n = spreads.len();
        let mid = &spreads[n / 6..n / 2];
        match s.method.as_str() {
            "lasso" => assert!(spreads.iter().any(|v| v.is_none_or(|x| x > 0.5))),
            _ => assert!(mid.iter().all(|v| v.is_some_and(|x| x < 0.15)), "{}: {:?}", s.method, mid),
        }
    }
    assert!(report.series[0].to_csv().starts_with("lambda,beta_1,"));
}

#[test]
fn cross_group_duplicates_need_not_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut a = DMatrix::from_fn(30, 4, |_, _| gauss(&mut rng));
    let col = a.column(0).clone_owned();
    a.set_column(2, &col);
    let y = DVector::from_fn(30, |i, _| 2.0 * a[(i, 0)] + a[(i, 1)] + 0.05 * gauss(&mut rng));
    let std = preprocess(&a, &y).unwrap();
    // group {0,1} gets a lot of ℓ2 mass, so the group {2,3} copy is dropped
    let part = Partition::contiguous(&[2, 2]).unwrap();
    let spec = RegularizerSpec::sparse_group_lasso(0.9, part.clone());
    let lambda = 5.0 / spec.zero_gauge((std.a.tr_mul(&std.y) * 2.0).as_slice());
    let p = Problem::lagrangian(std.a.clone(), std.y.clone(), lambda, LambdaSide::OnLoss).unwrap();
    let r = solve_lagrangian(&p, &spec, &SolverOptions::default()).unwrap();
    assert!((r.x_hat[0] - r.x_hat[2]).abs() > 1e-3, "{:?}", r.x_hat);
    let report = grouping_check(&std.a, &std.y, &r.x_hat, lambda, 0.9, &part).unwrap();
    assert!(report.kkt_passed);
    assert_eq!(report.violations, 0);
}

#[test]
fn grouping_bound_is_monotone_in_rho_and_mu() {
    let data = generate_grouping(&GroupingFixture::default(), &mut replication_rng(1, 0)).unwrap();
    let std = preprocess(&data.x, &data.y).unwrap();
    let part = Partition::single(6).unwrap();
    let spec = RegularizerSpec::clot(0.5);
    let lambda = 10.0 / spec.zero_gauge((std.a.tr_mul(&std.y) * 2.0).as_slice());
    let p = Problem::lagrangian(std.a.clone(), std.y.clone(), lambda, LambdaSide::OnLoss).unwrap();
    let r = solve_lagrangian(&p, &spec, &SolverOptions::default()).unwrap();
    let report = grouping_check(&std.a, &std.y, &r.x_hat, lambda, 0.5, &part).unwrap();
    let mut pairs = report.pairs.clone();
    pairs.sort_by(|a, b| a.rho_ij.total_cmp(&b.rho_ij));
    let norm = r.x_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    for w in pairs.windows(2) {
        assert!(w[1].bound_ij <= w[0].bound_ij + 1e-15);
    }
    for pair in &pairs {
        let at = |mu: f64| (2.0 * (1.0 - pair.rho_ij)).sqrt() * norm / mu;
        assert!(at(0.9) < at(0.5));
        assert_relative_eq!(at(0.5), pair.bound_ij, max_relative = 1e-12);
    }
}

#[test]
fn devore_rip_is_below_gershgorin_bound() {
    let a = devore_matrix(&DeVoreParams { p: 5, r: 2, n_truncate: None }, true).unwrap();
    for k in [2, 3] {
        let est = exact_rip(&a, k).unwrap();
        assert!(est.delta_k <= (k - 1) as f64 * 2.0 / 5.0 + 1e-12);
    }
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        count += 1;
    }
    assert!(count >= 8);
}

#[test]
fn study_reports_are_reproducible() {
    let text = r#"{"name":"r","generator":{"kind":"linear_model","beta":[1.0,0.0,-1.0,0.0,0.5],
        "covariance":{"kind":"equicorrelated","rho":0.3},"noise_sigma":1.0,"n_train":20,"n_validation":20,"n_test":50},
        "replications":4,"seed":99}"#;
    let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(a, b);
    let StudyReport::Comparison(report) = a else { panic!("wrong study") };
    assert_eq!(report.records.len(), 12);
}
