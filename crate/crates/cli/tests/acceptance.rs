//! Acceptance suite: one test per acceptance criterion, each printing a
//! pass line with its runtime and asserting the stated tolerance and time
//! budget. Run with `cargo test --test acceptance` (add `-- --nocapture`
//! to see the per-criterion lines).

use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zonoreach::config::{ExperimentConfig, LipschitzMode};
use zonoreach::experiment::run_experiment;
use zonoreach::{DEMO_LINEAR5D, DEMO_NONLINEAR};
use zonoreach_core::data::{
    build_noise_matrix_zonotope, simulate_linear, simulate_nonlinear, LinearSystem, NoiseModel,
    NonlinearSystem, TrajectoryData,
};
use zonoreach_core::linear_reach::{
    consistent_model_set, inclusion_check, model_based_reach, random_unit_vector,
};
use zonoreach_core::nonlinear_reach::{
    estimate_dispersion, estimate_lipschitz, propagate_nonlinear, EpsilonMode,
};
use zonoreach_core::parallel::map_indexed;
use zonoreach_core::sets::{MatrixZonotope, Zonotope};
use zonoreach_core::{Matrix, Vector};

/// Criteria run one at a time so the per-criterion budgets are measured
/// without interference from sibling tests.
static GATE: Mutex<()> = Mutex::new(());

fn finish(name: &str, detail: &str, start: Instant, budget_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("[PASS] {name}: {detail} in {elapsed:.2}s (budget {budget_s}s)");
    assert!(
        elapsed < budget_s,
        "{name} exceeded its {budget_s}s budget: {elapsed:.2}s"
    );
}

fn random_stable_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearSystem {
    let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let scale = a.norm();
    if scale > 0.0 {
        a *= rng.random_range(0.5..=0.9) / scale;
    }
    let b = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..=1.0));
    LinearSystem::new(a, b).unwrap()
}

#[test]
fn criterion_1_theorem1_membership_50_randomized_datasets() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let results = map_indexed(50, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i as u64);
        let n = rng.random_range(2..=5);
        let m = rng.random_range(1..=2);
        let t = rng.random_range(n + m + 10..=100);
        let sys = random_stable_system(&mut rng, n, m);
        let gw = rng.random_range(1..=2);
        let noise_gens = Matrix::from_fn(n, gw, |_, _| {
            rng.random_range(0.002..=0.02) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        });
        let bound = Zonotope::new(Vector::zeros(n), noise_gens).unwrap();
        let noise = NoiseModel::new(bound.clone());
        let x0 = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let inputs: Vec<Vector> = (0..t)
            .map(|_| Vector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        let seed = rng.random_range(0..u64::MAX);
        let tr = simulate_linear(&sys, &x0, &inputs, &noise, seed).unwrap();
        let data = TrajectoryData::assemble(&[tr], seed).unwrap();
        let mw = build_noise_matrix_zonotope(&bound, t).unwrap();
        let family = consistent_model_set(&data, &mw).unwrap();
        family.contains_matrix(&sys.stacked(), 1e-7).unwrap()
    });
    let certified = results.iter().filter(|&&ok| ok).count();
    assert_eq!(certified, 50, "only {certified}/50 memberships certified");
    finish(
        "criterion 1 (consistent-model-set membership)",
        "true [A B] certified in 50/50 randomized datasets",
        start,
        30.0,
    );
}

#[test]
fn criterion_2_linear_5d_overapproximation_and_containment() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = ExperimentConfig::from_json(DEMO_LINEAR5D).unwrap();
    assert_eq!(cfg.verification.trials, 1000);
    assert_eq!(cfg.verification.directions, 100);
    let report = run_experiment(&cfg).unwrap();

    let inclusion = report.inclusion.as_ref().expect("linear run has margins");
    assert!(inclusion.steps.len() == cfg.horizon + 1);
    for step in &inclusion.steps {
        assert!(
            step.worst_margin >= -1e-9,
            "step {} margin {} below -1e-9",
            step.step,
            step.worst_margin
        );
    }
    assert_eq!(
        report.containment.passes, 1000,
        "containment violations: {:?}",
        report.containment.failures
    );
    finish(
        "criterion 2 (5-state linear over-approximation)",
        "oracle dominated in 100 directions at every step; 1000/1000 trials contained",
        start,
        60.0,
    );
}

#[test]
fn criterion_3_nonlinear_pipeline_linear_degeneracy() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let sys = random_stable_system(&mut rng, 3, 1);
    let noise = NoiseModel::zero(3);
    let x0v = Vector::from_fn(3, |_, _| rng.random_range(-0.5..=0.5));
    let inputs_v: Vec<Vector> = (0..40)
        .map(|_| Vector::from_fn(1, |_, _| rng.random_range(-1.0..=1.0)))
        .collect();
    let tr = simulate_linear(&sys, &x0v, &inputs_v, &noise, 11).unwrap();
    let data = TrajectoryData::assemble(&[tr], 11).unwrap();

    let x0 = Zonotope::new(
        Vector::from_row_slice(&[0.5, -0.5, 0.25]),
        Matrix::identity(3, 3) * 0.1,
    )
    .unwrap();
    let u = vec![
        Zonotope::new(
            Vector::from_row_slice(&[0.25]),
            Matrix::from_row_slice(1, 1, &[0.1]),
        )
        .unwrap();
        4
    ];
    let zw = Zonotope::singleton(Vector::zeros(3));
    let (dd, diags) =
        propagate_nonlinear(&data, &x0, &u, &zw, 4, &EpsilonMode::Neglect, 20.0).unwrap();
    let oracle = model_based_reach(&sys, &x0, &u, &zw, 4, 20.0).unwrap();

    for d in &diags {
        let radius = d
            .z_l_lower
            .iter()
            .chain(d.z_l_upper.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        assert!(radius < 1e-6, "step {}: residual set radius {radius}", d.k);
    }
    let fwd = inclusion_check(&oracle, &dd, 100, 31).unwrap();
    let bwd = inclusion_check(&dd, &oracle, 100, 32).unwrap();
    for report in [&fwd, &bwd] {
        for step in &report.steps {
            assert!(
                step.worst_margin >= -1e-6,
                "two-sided support mismatch at step {}: {}",
                step.step,
                step.worst_margin
            );
        }
    }
    finish(
        "criterion 3 (linear degeneracy of the nonlinear pipeline)",
        "model-based sets reproduced within 1e-6 support tolerance, residual set below 1e-6",
        start,
        10.0,
    );
}

#[test]
fn criterion_4_nonlinear_benchmark_containment_and_covering_dominance() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = ExperimentConfig::from_json(DEMO_NONLINEAR).unwrap();
    assert_eq!(cfg.verification.trials, 500);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(
        report.containment.passes, 500,
        "containment violations: {:?}",
        report.containment.failures
    );
    assert!(!report.reach_data_driven.meta.guaranteed);

    let mut padded_cfg = cfg.clone();
    padded_cfg.lipschitz.mode = LipschitzMode::Estimated;
    let padded = run_experiment(&padded_cfg).unwrap();
    assert!(padded.reach_data_driven.meta.guaranteed);
    let dominance = inclusion_check(
        &report.reach_data_driven,
        &padded.reach_data_driven,
        100,
        41,
    )
    .unwrap();
    assert!(
        dominance.steps.iter().all(|s| s.worst_margin >= -1e-9),
        "covering term failed to dominate: {:?}",
        dominance.steps
    );
    let diag = &padded.step_diagnostics.as_ref().unwrap()[0];
    assert!(diag.epsilon_used > 0.0);
    finish(
        "criterion 4 (nonlinear benchmark)",
        "500/500 trials contained with the covering term neglected; estimated covering term only enlarges",
        start,
        60.0,
    );
}

#[test]
fn criterion_5_set_algebra_law_suite() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    let random_zonotope = |rng: &mut ChaCha8Rng, dim: usize, gens: usize| {
        Zonotope::new(
            Vector::from_fn(dim, |_, _| rng.random_range(-3.0..=3.0)),
            Matrix::from_fn(dim, gens, |_, _| rng.random_range(-3.0..=3.0)),
        )
        .unwrap()
    };

    // Minkowski-sum support additivity, exact to 1e-12.
    for _ in 0..50 {
        let z1 = random_zonotope(&mut rng, 3, 4);
        let z2 = random_zonotope(&mut rng, 3, 3);
        let s = z1.minkowski_sum(&z2).unwrap();
        for _ in 0..20 {
            let d = random_unit_vector(&mut rng, 3);
            let lhs = s.support_value(&d).unwrap();
            let rhs = z1.support_value(&d).unwrap() + z2.support_value(&d).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
        }
    }

    // Linear-map support identity h(MZ, d) = h(Z, M'd).
    for _ in 0..50 {
        let z = random_zonotope(&mut rng, 3, 4);
        let m = Matrix::from_fn(2, 3, |_, _| rng.random_range(-2.0..=2.0));
        let mapped = z.linear_map(&m).unwrap();
        for _ in 0..20 {
            let d = random_unit_vector(&mut rng, 2);
            let pulled = m.transpose() * &d;
            if pulled.norm() == 0.0 {
                continue;
            }
            let lhs = mapped.support_value(&d).unwrap();
            let rhs = z.support_value(&pulled).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
        }
    }

    // Interval-matrix soundness (samples inside) and tightness (bounds
    // attained by sign patterns).
    for _ in 0..20 {
        let c = Matrix::from_fn(3, 4, |_, _| rng.random_range(-2.0..=2.0));
        let gens: Vec<Matrix> = (0..3)
            .map(|_| Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        let mz = MatrixZonotope::new(c, gens).unwrap();
        let iv = mz.to_interval_matrix();
        for _ in 0..20 {
            assert!(iv.contains(&mz.sample(&mut rng), 1e-12));
        }
        for i in 0..3 {
            for j in 0..4 {
                let mut hi = mz.center().clone();
                let mut lo = mz.center().clone();
                for g in mz.generators() {
                    let sign = if g[(i, j)] >= 0.0 { 1.0 } else { -1.0 };
                    hi += g * sign;
                    lo += g * (-sign);
                }
                assert!((hi[(i, j)] - iv.upper()[(i, j)]).abs() <= 1e-12);
                assert!((lo[(i, j)] - iv.lower()[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    // 2-D projection against brute-force sign enumeration, gamma <= 10.
    for trial in 0..30 {
        let gens = 1 + trial % 10;
        let z = random_zonotope(&mut rng, 2, gens);
        let poly = z.project((0, 1)).unwrap();
        let hull = convex_hull(&sign_points(&z));
        let diff = (polygon_area(&poly) - polygon_area(&hull)).abs();
        assert!(diff < 1e-9, "area difference {diff} with {gens} generators");
    }

    // Order-reduction support dominance.
    for _ in 0..20 {
        let z = random_zonotope(&mut rng, 3, 14);
        let reduced = z.reduce_order(2.0);
        for _ in 0..100 {
            let d = random_unit_vector(&mut rng, 3);
            let h0 = z.support_value(&d).unwrap();
            let h1 = reduced.support_value(&d).unwrap();
            assert!(h1 >= h0 - 1e-12, "reduction lost support: {h1} < {h0}");
        }
    }

    finish(
        "criterion 5 (set-algebra law suite)",
        "sum/map support identities, interval bounds, projection oracle, reduction dominance all hold",
        start,
        10.0,
    );
}

#[test]
fn criterion_6_pointwise_estimators_match_brute_force() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let n = rng.random_range(1..=3);
        let m = rng.random_range(0..=2);
        let t = rng.random_range(2..=30);
        let coefficients: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..=0.5)).collect();
        let sys = NonlinearSystem::new(n, m, move |x, u| {
            Vector::from_fn(x.len(), |r, _| {
                let xi = x[r];
                let ui = if u.len() > 0 { u[r % u.len()] } else { 0.0 };
                coefficients[0] * xi + coefficients[1] * xi * xi
                    + coefficients[2] * ui
                    + coefficients[3]
            })
        });
        let bound = Zonotope::new(
            Vector::zeros(n),
            Matrix::from_fn(n, 1, |_, _| 0.01),
        )
        .unwrap();
        let x0 = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let inputs: Vec<Vector> = (0..t)
            .map(|_| Vector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        let tr =
            simulate_nonlinear(&sys, &x0, &inputs, &NoiseModel::new(bound), 600 + i).unwrap();
        let data = TrajectoryData::assemble(&[tr], 600 + i).unwrap();

        let (oracle_l, oracle_d) = brute_force_estimators(&data);
        assert_eq!(
            estimate_lipschitz(&data).unwrap(),
            oracle_l,
            "Lipschitz estimate mismatch on dataset {i}"
        );
        assert_eq!(
            estimate_dispersion(&data).unwrap(),
            oracle_d,
            "dispersion estimate mismatch on dataset {i}"
        );
    }
    finish(
        "criterion 6 (pairwise estimators)",
        "slope and dispersion estimates equal the brute-force oracle on 20 datasets",
        start,
        10.0,
    );
}

#[test]
fn criterion_7_repeated_runs_are_byte_identical() {
    let _g = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut cfg = ExperimentConfig::from_json(DEMO_NONLINEAR).unwrap();
    cfg.verification.trials = 60;
    let a = run_experiment(&cfg).unwrap().to_json();
    let b = run_experiment(&cfg).unwrap().to_json();
    assert_eq!(a.len(), b.len());
    assert!(a == b, "reports differ between identical runs");

    let mut lin = ExperimentConfig::from_json(DEMO_LINEAR5D).unwrap();
    lin.verification.trials = 40;
    let c = run_experiment(&lin).unwrap().to_json();
    let d = run_experiment(&lin).unwrap().to_json();
    assert!(c == d, "linear reports differ between identical runs");
    finish(
        "criterion 7 (determinism)",
        "repeated runs produce byte-identical JSON reports",
        start,
        60.0,
    );
}

// --- test-local oracles -------------------------------------------------

fn brute_force_estimators(data: &TrajectoryData) -> (f64, f64) {
    let t = data.total_transitions();
    let n = data.state_dim();
    let m = data.input_dim();
    let z = |i: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(n + m);
        for r in 0..n {
            v.push(data.x_minus()[(r, i)]);
        }
        for r in 0..m {
            v.push(data.u_minus()[(r, i)]);
        }
        v
    };
    let f = |i: usize| -> Vec<f64> { (0..n).map(|r| data.x_plus()[(r, i)]).collect() };
    let norm = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut best_slope = f64::NEG_INFINITY;
    let mut dispersion = 0.0_f64;
    for i in 0..t {
        let mut nearest = f64::INFINITY;
        for j in 0..t {
            if i == j {
                continue;
            }
            let dz = norm(&z(i), &z(j));
            nearest = nearest.min(dz);
            if j > i && dz >= 1e-12 {
                best_slope = best_slope.max(norm(&f(i), &f(j)) / dz);
            }
        }
        dispersion = dispersion.max(nearest);
    }
    (best_slope, dispersion)
}

fn sign_points(z: &Zonotope) -> Vec<[f64; 2]> {
    let g = z.num_generators();
    let mut points = Vec::with_capacity(1 << g);
    for mask in 0..(1u32 << g) {
        let mut p = [z.center()[0], z.center()[1]];
        for j in 0..g {
            let s = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
            p[0] += s * z.generators()[(0, j)];
            p[1] += s * z.generators()[(1, j)];
        }
        points.push(p);
    }
    points
}

fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    (a / 2.0).abs()
}
