//! Reachability for unknown linear systems: the matrix zonotope of all
//! data-consistent models, forward propagation through it, the model-based
//! oracle recursion, and support-function inclusion checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{right_inverse, LinearSystem, TrajectoryData};
use crate::sets::{point_in_convex_polygon, MatrixZonotope, Sign, Zonotope};
use crate::{ReachError, Result, Vector};

/// Which pipeline produced a reach sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReachMode {
    ModelBased,
    DataDrivenLinear,
    DataDrivenNonlinear,
}

/// Provenance metadata attached to a reach sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachMeta {
    pub mode: ReachMode,
    pub horizon: usize,
    pub max_order: f64,
    /// Generator count of each set, index 0..=horizon.
    pub generator_counts: Vec<usize>,
    /// False when a term needed for the formal guarantee was deliberately
    /// omitted (the neglected Lipschitz covering term).
    pub guaranteed: bool,
}

/// An ordered sequence of reachable-set over-approximations, one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachSequence {
    pub sets: Vec<Zonotope>,
    pub meta: ReachMeta,
}

impl ReachSequence {
    pub fn horizon(&self) -> usize {
        self.sets.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.sets.first().map_or(0, Zonotope::dim)
    }

    /// CSV of per-step interval hulls with columns `k,dim,lower,upper`;
    /// exactly `(horizon + 1) * dim` data rows.
    pub fn interval_hull_csv(&self) -> String {
        let mut s = String::from("k,dim,lower,upper\n");
        for (k, set) in self.sets.iter().enumerate() {
            let (lo, hi) = set.interval_hull();
            for d in 0..set.dim() {
                s.push_str(&format!("{k},{d},{},{}\n", lo[d], hi[d]));
            }
        }
        s
    }

    fn generator_counts(sets: &[Zonotope]) -> Vec<usize> {
        sets.iter().map(Zonotope::num_generators).collect()
    }
}

/// The matrix zonotope containing every `[A B]` consistent with the data
/// and the noise bound: `(X_plus - M_w) H` with `H` a right-inverse of the
/// stacked regressor. Fails when the excitation rank condition does not
/// hold.
pub fn consistent_model_set(
    data: &TrajectoryData,
    noise_matrix: &MatrixZonotope,
) -> Result<MatrixZonotope> {
    if noise_matrix.nrows() != data.state_dim()
        || noise_matrix.ncols() != data.total_transitions()
    {
        return Err(ReachError::dim(
            "consistent_model_set",
            format!("{}x{}", data.state_dim(), data.total_transitions()),
            format!("{}x{}", noise_matrix.nrows(), noise_matrix.ncols()),
        ));
    }
    let h = right_inverse(&data.stacked_state_input())?;
    noise_matrix
        .affine(data.x_plus(), Sign::Minus)?
        .mul_matrix(&h)
}

/// Propagate `R_{k+1} = M (R_k x U_k) + Z_w` for `horizon` steps starting
/// from `initial`, reducing every computed set to the order budget. With a
/// model family `M` containing the true `[A B]`, each set contains the true
/// reachable set.
pub fn propagate_linear(
    model_family: &MatrixZonotope,
    initial: &Zonotope,
    inputs: &[Zonotope],
    noise_bound: &Zonotope,
    horizon: usize,
    max_order: f64,
) -> Result<ReachSequence> {
    let n = initial.dim();
    if model_family.nrows() != n {
        return Err(ReachError::dim(
            "propagate_linear",
            format!("{n} model rows"),
            format!("{}", model_family.nrows()),
        ));
    }
    if noise_bound.dim() != n {
        return Err(ReachError::dim("propagate_linear noise", n, noise_bound.dim()));
    }
    if inputs.len() < horizon {
        return Err(ReachError::dim(
            "propagate_linear inputs",
            format!("{horizon} input sets"),
            format!("{}", inputs.len()),
        ));
    }
    let mut sets = Vec::with_capacity(horizon + 1);
    sets.push(initial.clone());
    for k in 0..horizon {
        let stacked = sets[k].cartesian_product(&inputs[k]);
        if model_family.ncols() != stacked.dim() {
            return Err(ReachError::dim(
                "propagate_linear",
                format!("model with {} columns", stacked.dim()),
                format!("{}", model_family.ncols()),
            ));
        }
        let next = model_family
            .mul_zonotope(&stacked)?
            .minkowski_sum(noise_bound)?
            .reduce_order(max_order);
        sets.push(next);
    }
    let generator_counts = ReachSequence::generator_counts(&sets);
    Ok(ReachSequence {
        sets,
        meta: ReachMeta {
            mode: ReachMode::DataDrivenLinear,
            horizon,
            max_order,
            generator_counts,
            guaranteed: true,
        },
    })
}

/// Oracle recursion with the known model: `R_{k+1} = [A B](R_k x U_k) + Z_w`.
/// Identical to [`propagate_linear`] with the singleton model family.
pub fn model_based_reach(
    system: &LinearSystem,
    initial: &Zonotope,
    inputs: &[Zonotope],
    noise_bound: &Zonotope,
    horizon: usize,
    max_order: f64,
) -> Result<ReachSequence> {
    let family = MatrixZonotope::singleton(system.stacked());
    let mut seq = propagate_linear(&family, initial, inputs, noise_bound, horizon, max_order)?;
    seq.meta.mode = ReachMode::ModelBased;
    Ok(seq)
}

/// Per-step worst support margin of `outer` over `inner`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInclusion {
    pub step: usize,
    /// `min_d (h_outer(d) - h_inner(d))` over the sampled directions;
    /// negative means a witnessed violation.
    pub worst_margin: f64,
}

/// Result of a sampled inclusion check between two reach sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub directions: usize,
    pub steps: Vec<StepInclusion>,
    /// Exact 2-D certificate (projected-polygon containment), produced
    /// only for planar sequences.
    pub polygon_certified: Option<bool>,
    pub pass: bool,
}

const INCLUSION_MARGIN_TOL: f64 = 1e-9;

/// Sample support-function dominance of `outer` over `inner` in random
/// unit directions at every step: a densely sampled necessary condition
/// for `inner[k] subset outer[k]`. For 2-D sequences an exact
/// polygon-containment certificate is produced as well.
pub fn inclusion_check(
    inner: &ReachSequence,
    outer: &ReachSequence,
    directions: usize,
    seed: u64,
) -> Result<InclusionReport> {
    if inner.sets.len() != outer.sets.len() {
        return Err(ReachError::dim(
            "inclusion_check",
            format!("{} sets", inner.sets.len()),
            format!("{}", outer.sets.len()),
        ));
    }
    let n = inner.dim();
    if n != outer.dim() {
        return Err(ReachError::dim("inclusion_check", n, outer.dim()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vector> = (0..directions).map(|_| random_unit_vector(&mut rng, n)).collect();
    let mut steps = Vec::with_capacity(inner.sets.len());
    let mut pass = true;
    for (k, (zi, zo)) in inner.sets.iter().zip(outer.sets.iter()).enumerate() {
        let mut worst = f64::INFINITY;
        for d in &dirs {
            let margin = zo.support_value(d)? - zi.support_value(d)?;
            if margin < worst {
                worst = margin;
            }
        }
        if worst < -INCLUSION_MARGIN_TOL {
            pass = false;
        }
        steps.push(StepInclusion {
            step: k,
            worst_margin: worst,
        });
    }
    let polygon_certified = if n == 2 {
        let mut ok = true;
        for (zi, zo) in inner.sets.iter().zip(outer.sets.iter()) {
            let pi = zi.project((0, 1))?;
            let po = zo.project((0, 1))?;
            let scale = po
                .iter()
                .chain(pi.iter())
                .flat_map(|v| v.iter())
                .fold(1.0_f64, |a, &x| a.max(x.abs()));
            if !pi
                .iter()
                .all(|&v| point_in_convex_polygon(&po, v, INCLUSION_MARGIN_TOL * scale))
            {
                ok = false;
                break;
            }
        }
        pass = pass && ok;
        Some(ok)
    } else {
        None
    };
    Ok(InclusionReport {
        directions,
        steps,
        polygon_certified,
        pass,
    })
}

/// Uniform-enough random direction on the unit sphere (normalized cube
/// sample, rejecting near-zero draws).
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        build_noise_matrix_zonotope, simulate_linear, NoiseModel, Trajectory, TrajectoryData,
    };
    use crate::Matrix;

    fn random_stable_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearSystem {
        let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
        // Crude spectral normalization: scale by the Frobenius bound.
        let bound = a.norm();
        if bound > 0.0 {
            a *= 0.9 / bound;
        }
        let b = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..=1.0));
        LinearSystem::new(a, b).unwrap()
    }

    fn record_data(
        rng: &mut ChaCha8Rng,
        sys: &LinearSystem,
        noise: &NoiseModel,
        steps: usize,
    ) -> TrajectoryData {
        let x0 = Vector::from_fn(sys.state_dim(), |_, _| rng.random_range(-1.0..=1.0));
        let inputs: Vec<Vector> = (0..steps)
            .map(|_| Vector::from_fn(sys.input_dim(), |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        let seed = rng.random_range(0..u64::MAX);
        let tr = simulate_linear(sys, &x0, &inputs, noise, seed).unwrap();
        TrajectoryData::assemble(&[tr], seed).unwrap()
    }

    #[test]
    fn noise_free_model_set_is_singleton_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sys = random_stable_system(&mut rng, 3, 1);
        let noise = NoiseModel::zero(3);
        let data = record_data(&mut rng, &sys, &noise, 25);
        let mw = build_noise_matrix_zonotope(noise.bound(), data.total_transitions()).unwrap();
        let family = consistent_model_set(&data, &mw).unwrap();
        assert!(family.is_singleton());
        assert!((family.center() - sys.stacked()).amax() < 1e-8);
    }

    #[test]
    fn square_regressor_uses_exact_inverse() {
        // T = n + m with an invertible regressor: H is its exact inverse.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let sys = random_stable_system(&mut rng, 2, 1);
        let noise = NoiseModel::new(
            Zonotope::new(
                Vector::zeros(2),
                Matrix::from_row_slice(2, 1, &[0.01, 0.01]),
            )
            .unwrap(),
        );
        let data = record_data(&mut rng, &sys, &noise, 3);
        let stacked = data.stacked_state_input();
        let h = right_inverse(&stacked).unwrap();
        assert!((&stacked * &h - Matrix::identity(3, 3)).amax() < 1e-9);
        assert!((&h * &stacked - Matrix::identity(3, 3)).amax() < 1e-8);

        let mw = build_noise_matrix_zonotope(noise.bound(), 3).unwrap();
        let family = consistent_model_set(&data, &mw).unwrap();
        let expected_center = (data.x_plus() - mw.center()) * &h;
        assert!((family.center() - expected_center).amax() < 1e-12);
    }

    #[test]
    fn true_model_is_member_of_noisy_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let sys = random_stable_system(&mut rng, 2, 1);
            let noise = NoiseModel::new(
                Zonotope::new(
                    Vector::zeros(2),
                    Matrix::from_row_slice(2, 1, &[0.02, 0.015]),
                )
                .unwrap(),
            );
            let data = record_data(&mut rng, &sys, &noise, 30);
            let mw = build_noise_matrix_zonotope(noise.bound(), 30).unwrap();
            let family = consistent_model_set(&data, &mw).unwrap();
            assert!(family.contains_matrix(&sys.stacked(), 1e-7).unwrap());
        }
    }

    #[test]
    fn zero_horizon_returns_initial_only() {
        let x0 = Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let seq = model_based_reach(
            &LinearSystem::new(Matrix::identity(2, 2), Matrix::zeros(2, 1)).unwrap(),
            &x0,
            &[],
            &Zonotope::singleton(Vector::zeros(2)),
            0,
            20.0,
        )
        .unwrap();
        assert_eq!(seq.sets.len(), 1);
        assert_eq!(seq.sets[0], x0);
        assert_eq!(seq.meta.generator_counts, vec![2]);
    }

    #[test]
    fn singleton_recursion_tracks_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sys = random_stable_system(&mut rng, 2, 1);
        let x0 = Vector::from_row_slice(&[0.4, -0.2]);
        let inputs_v: Vec<Vector> = (0..4).map(|_| Vector::from_fn(1, |_, _| rng.random_range(-1.0..=1.0))).collect();
        let input_sets: Vec<Zonotope> =
            inputs_v.iter().map(|u| Zonotope::singleton(u.clone())).collect();
        let seq = model_based_reach(
            &sys,
            &Zonotope::singleton(x0.clone()),
            &input_sets,
            &Zonotope::singleton(Vector::zeros(2)),
            4,
            20.0,
        )
        .unwrap();
        let tr = simulate_linear(&sys, &x0, &inputs_v, &NoiseModel::zero(2), 0).unwrap();
        for (set, state) in seq.sets.iter().zip(tr.states.iter()) {
            assert!(set.is_singleton());
            assert!((set.center() - state).amax() < 1e-12);
        }
    }

    #[test]
    fn vanishing_dynamics_settle_to_noise_bound() {
        let sys = LinearSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1)).unwrap();
        let x0 = Zonotope::new(
            Vector::from_row_slice(&[5.0, -3.0]),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let zw = Zonotope::new(
            Vector::zeros(2),
            Matrix::from_row_slice(2, 1, &[0.1, 0.1]),
        )
        .unwrap();
        let u = vec![Zonotope::singleton(Vector::from_row_slice(&[1.0])); 3];
        let seq = model_based_reach(&sys, &x0, &u, &zw, 3, 20.0).unwrap();
        for set in &seq.sets[1..] {
            assert_eq!(set, &zw);
        }
    }

    #[test]
    fn scalar_contraction_closed_form() {
        let sys = LinearSystem::new(
            Matrix::from_row_slice(1, 1, &[0.5]),
            Matrix::from_row_slice(1, 1, &[0.0]),
        )
        .unwrap();
        let x0 = Zonotope::new(
            Vector::zeros(1),
            Matrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let u = vec![Zonotope::singleton(Vector::zeros(1)); 5];
        let seq = model_based_reach(
            &sys,
            &x0,
            &u,
            &Zonotope::singleton(Vector::zeros(1)),
            5,
            20.0,
        )
        .unwrap();
        for (k, set) in seq.sets.iter().enumerate() {
            let (lo, hi) = set.interval_hull();
            let half = 0.5_f64.powi(k as i32);
            assert!((lo[0] + half).abs() < 1e-12);
            assert!((hi[0] - half).abs() < 1e-12);
        }
    }

    #[test]
    fn data_driven_dominates_oracle_and_contains_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let sys = random_stable_system(&mut rng, 2, 1);
        let noise = NoiseModel::new(
            Zonotope::new(
                Vector::zeros(2),
                Matrix::from_row_slice(2, 1, &[0.005, 0.005]),
            )
            .unwrap(),
        );
        let data = record_data(&mut rng, &sys, &noise, 40);
        let mw = build_noise_matrix_zonotope(noise.bound(), 40).unwrap();
        let family = consistent_model_set(&data, &mw).unwrap();

        let x0 = Zonotope::new(
            Vector::from_row_slice(&[1.0, 1.0]),
            Matrix::identity(2, 2) * 0.1,
        )
        .unwrap();
        let u = vec![
            Zonotope::new(
                Vector::from_row_slice(&[0.5]),
                Matrix::from_row_slice(1, 1, &[0.25]),
            )
            .unwrap();
            5
        ];
        let dd = propagate_linear(&family, &x0, &u, noise.bound(), 5, 20.0).unwrap();
        let oracle = model_based_reach(&sys, &x0, &u, noise.bound(), 5, 20.0).unwrap();

        let report = inclusion_check(&oracle, &dd, 100, 11).unwrap();
        assert!(report.pass, "margins: {:?}", report.steps);
        assert_eq!(report.polygon_certified, Some(true));

        // Monte Carlo: fresh true-system trajectories stay inside.
        for trial in 0..100u64 {
            let mut trng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let x0s = x0.sample(&mut trng);
            let inputs: Vec<Vector> = u.iter().map(|z| z.sample(&mut trng)).collect();
            let tr =
                simulate_linear_with_seeded(&sys, &x0s, &inputs, &noise, 5000 + trial);
            for (k, state) in tr.states.iter().enumerate() {
                assert!(
                    dd.sets[k].contains_point(state, 1e-7).unwrap(),
                    "trial {trial} escaped at step {k}"
                );
            }
        }
    }

    fn simulate_linear_with_seeded(
        sys: &LinearSystem,
        x0: &Vector,
        inputs: &[Vector],
        noise: &NoiseModel,
        seed: u64,
    ) -> Trajectory {
        simulate_linear(sys, x0, inputs, noise, seed).unwrap()
    }

    #[test]
    fn noise_monotonicity_without_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let sys = random_stable_system(&mut rng, 2, 1);
        let noise = NoiseModel::new(
            Zonotope::new(
                Vector::zeros(2),
                Matrix::from_row_slice(2, 1, &[0.01, 0.01]),
            )
            .unwrap(),
        );
        let data = record_data(&mut rng, &sys, &noise, 30);
        let x0 = Zonotope::new(Vector::from_row_slice(&[1.0, 1.0]), Matrix::identity(2, 2) * 0.1)
            .unwrap();
        let u = vec![Zonotope::singleton(Vector::from_row_slice(&[0.3])); 4];

        let run = |scale: f64| {
            let zw = noise.bound().scale(scale);
            let mw = build_noise_matrix_zonotope(&zw, 30).unwrap();
            let family = consistent_model_set(&data, &mw).unwrap();
            propagate_linear(&family, &x0, &u, &zw, 4, 1000.0).unwrap()
        };
        let small = run(1.0);
        let large = run(1.5);
        let report = inclusion_check(&small, &large, 100, 3).unwrap();
        assert!(report.pass, "{:?}", report.steps);
    }

    #[test]
    fn inclusion_reflexive_and_shrunk() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let gens = Matrix::from_fn(2, 5, |_, _| rng.random_range(-1.0..=1.0));
        let z = Zonotope::new(Vector::from_row_slice(&[1.0, -1.0]), gens).unwrap();
        let meta = ReachMeta {
            mode: ReachMode::ModelBased,
            horizon: 0,
            max_order: 20.0,
            generator_counts: vec![z.num_generators()],
            guaranteed: true,
        };
        let seq = ReachSequence {
            sets: vec![z.clone()],
            meta: meta.clone(),
        };
        let refl = inclusion_check(&seq, &seq, 64, 1).unwrap();
        assert!(refl.pass);
        assert!(refl.steps[0].worst_margin >= -1e-9);

        let shrunk = ReachSequence {
            sets: vec![z.scale(0.5)],
            meta,
        };
        let rep = inclusion_check(&shrunk, &seq, 64, 2).unwrap();
        assert!(rep.pass);
        assert!(rep.steps[0].worst_margin > 0.0);

        let rev = inclusion_check(&seq, &shrunk, 64, 3).unwrap();
        assert!(!rev.pass);
    }

    #[test]
    fn coarser_reduction_contains_finer() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let sys = random_stable_system(&mut rng, 3, 1);
        let noise = NoiseModel::new(
            Zonotope::new(
                Vector::zeros(3),
                Matrix::from_row_slice(3, 1, &[0.01, 0.01, 0.01]),
            )
            .unwrap(),
        );
        let data = record_data(&mut rng, &sys, &noise, 40);
        let mw = build_noise_matrix_zonotope(noise.bound(), 40).unwrap();
        let family = consistent_model_set(&data, &mw).unwrap();
        let x0 = Zonotope::new(
            Vector::from_row_slice(&[1.0, 0.0, -1.0]),
            Matrix::identity(3, 3) * 0.1,
        )
        .unwrap();
        let u = vec![Zonotope::new(
            Vector::from_row_slice(&[0.2]),
            Matrix::from_row_slice(1, 1, &[0.1]),
        )
        .unwrap(); 6];
        let coarse = propagate_linear(&family, &x0, &u, noise.bound(), 6, 5.0).unwrap();
        let fine = propagate_linear(&family, &x0, &u, noise.bound(), 6, 50.0).unwrap();
        let report = inclusion_check(&fine, &coarse, 100, 9).unwrap();
        assert!(report.pass, "{:?}", report.steps);
    }

    #[test]
    fn reach_sequence_csv_and_json() {
        let x0 = Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let sys = LinearSystem::new(Matrix::identity(2, 2) * 0.5, Matrix::zeros(2, 1)).unwrap();
        let u = vec![Zonotope::singleton(Vector::zeros(1)); 2];
        let seq = model_based_reach(
            &sys,
            &x0,
            &u,
            &Zonotope::singleton(Vector::zeros(2)),
            2,
            20.0,
        )
        .unwrap();
        let csv = seq.interval_hull_csv();
        assert_eq!(csv.lines().count(), 1 + 3 * 2);

        let json = serde_json::to_string(&seq).unwrap();
        let back: ReachSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(seq, back);
        assert!(json.contains("\"model-based\""));
    }
}
