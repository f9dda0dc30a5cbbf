//! End-to-end experiment orchestration: data generation, reachability,
//! inclusion checking, and Monte Carlo containment verification.
//!
//! Everything is deterministic given the config seed: per-trajectory and
//! per-trial RNGs are derived from it with fixed domain tags, and parallel
//! verification aggregates in trial order.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use zonoreach_core::data::{
    build_noise_matrix_zonotope, derive_seed, rank_report, simulate_nonlinear_with_rng,
    NoiseModel, NonlinearSystem, RankMode, RankReport, TrajectoryData,
};
use zonoreach_core::linear_reach::{
    consistent_model_set, inclusion_check, model_based_reach, propagate_linear, InclusionReport,
    ReachSequence,
};
use zonoreach_core::nonlinear_reach::{propagate_nonlinear, StepDiagnostic};
use zonoreach_core::parallel;
use zonoreach_core::Vector;

use crate::config::{
    ExperimentConfig, HarnessError, HarnessResult, Mode, ValidatedExperiment,
};

const SEED_DOMAIN_DATA: u64 = 0;
const SEED_DOMAIN_VERIFY: u64 = 1;
const SEED_DOMAIN_DIRECTIONS: u64 = 2;

/// How many verification trials contribute their states to the report's
/// plotting subsample.
const MC_STATES_KEPT: usize = 200;
/// Cap on stored counterexamples.
const FAILURES_KEPT: usize = 20;

/// One escaped trial: the first step at which the simulated state left the
/// computed set, with the offending state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentFailure {
    pub trial: usize,
    pub step: usize,
    pub state: Vec<f64>,
}

/// Monte Carlo containment outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentTally {
    pub trials: usize,
    pub passes: usize,
    pub failures: Vec<ContainmentFailure>,
}

/// Full experiment output. Serializes to a deterministic JSON document;
/// wall-clock timing goes to the log, not the report, so identical runs
/// are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub rank: RankReport,
    pub reach_data_driven: ReachSequence,
    pub reach_oracle: Option<ReachSequence>,
    pub inclusion: Option<InclusionReport>,
    pub step_diagnostics: Option<Vec<StepDiagnostic>>,
    pub containment: ContainmentTally,
    /// Per-step states from the first verification trials, for plotting.
    pub mc_states: Vec<Vec<Vec<f64>>>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> HarnessResult<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

fn generate_data(v: &ValidatedExperiment) -> HarnessResult<TrajectoryData> {
    let sys = v.system.as_nonlinear();
    let noise = NoiseModel::new(v.noise_set.clone());
    let init = v.initial_set.scale(v.config.data_plan.init_scale);
    let master = v.config.seed;
    let mut trajectories = Vec::with_capacity(v.steps_per_trajectory.len());
    for (i, &steps) in v.steps_per_trajectory.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, SEED_DOMAIN_DATA, i as u64));
        let x0 = init.sample(&mut rng);
        let inputs: Vec<Vector> = (0..steps)
            .map(|k| v.input_sets[k % v.input_sets.len()].sample(&mut rng))
            .collect();
        let tr = simulate_nonlinear_with_rng(&sys, &x0, &inputs, &noise, &mut rng)?;
        trajectories.push(tr);
    }
    Ok(TrajectoryData::assemble(&trajectories, master)?)
}

/// Run a full experiment: generate identification data, compute the
/// data-driven reachable sets (plus the model-based oracle and inclusion
/// margins in linear mode), and verify containment by Monte Carlo.
pub fn run_experiment(config: &ExperimentConfig) -> HarnessResult<ExperimentReport> {
    let started = Instant::now();
    let v = config.validate()?;
    let data = generate_data(&v)?;

    let rank_mode = match config.mode {
        Mode::Linear => RankMode::Linear,
        Mode::Nonlinear => RankMode::Affine {
            x_star: v.initial_set.center().clone(),
            u_star: v.input_sets[0].center().clone(),
        },
    };
    let rank = rank_report(&data, &rank_mode);
    log::debug!(
        "excitation rank {}/{} (sigma_min {:.3e})",
        rank.rank,
        rank.required,
        rank.singular_values.last().copied().unwrap_or(0.0)
    );

    let horizon = config.horizon;
    let (reach_data_driven, reach_oracle, inclusion, step_diagnostics) = match config.mode {
        Mode::Linear => {
            let noise_matrix =
                build_noise_matrix_zonotope(&v.noise_set, data.total_transitions())?;
            let family = consistent_model_set(&data, &noise_matrix)?;
            let dd = propagate_linear(
                &family,
                &v.initial_set,
                &v.input_sets,
                &v.noise_set,
                horizon,
                config.max_order,
            )?;
            let sys = v.system.linear().expect("validated linear mode");
            let oracle = model_based_reach(
                sys,
                &v.initial_set,
                &v.input_sets,
                &v.noise_set,
                horizon,
                config.max_order,
            )?;
            let inclusion = inclusion_check(
                &oracle,
                &dd,
                config.verification.directions,
                derive_seed(config.seed, SEED_DOMAIN_DIRECTIONS, 0),
            )?;
            (dd, Some(oracle), Some(inclusion), None)
        }
        Mode::Nonlinear => {
            let (dd, diags) = propagate_nonlinear(
                &data,
                &v.initial_set,
                &v.input_sets,
                &v.noise_set,
                horizon,
                &v.epsilon_mode,
                config.max_order,
            )?;
            (dd, None, None, Some(diags))
        }
    };

    let (containment, mc_states) = containment_sweep(
        &reach_data_driven,
        &v,
        config.verification.trials,
        config.seed,
    )?;

    log::info!(
        "experiment `{}`: {} steps, {}/{} trials contained, {:.2?} elapsed",
        config.name,
        horizon,
        containment.passes,
        containment.trials,
        started.elapsed()
    );

    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        rank,
        reach_data_driven,
        reach_oracle,
        inclusion,
        step_diagnostics,
        containment,
        mc_states,
    })
}

/// Re-run the Monte Carlo containment check for an existing sequence under
/// a config (the `verify` subcommand). Deterministic given `master_seed`.
pub fn verify_containment(
    seq: &ReachSequence,
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
) -> HarnessResult<ContainmentTally> {
    let v = config.validate()?;
    let (tally, _) = containment_sweep_seeded(seq, &v, trials, master_seed)?;
    Ok(tally)
}

fn containment_sweep(
    seq: &ReachSequence,
    v: &ValidatedExperiment,
    trials: usize,
    master_seed: u64,
) -> HarnessResult<(ContainmentTally, Vec<Vec<Vec<f64>>>)> {
    containment_sweep_seeded(seq, v, trials, master_seed)
}

fn containment_sweep_seeded(
    seq: &ReachSequence,
    v: &ValidatedExperiment,
    trials: usize,
    master_seed: u64,
) -> HarnessResult<(ContainmentTally, Vec<Vec<Vec<f64>>>)> {
    let horizon = seq.horizon();
    if v.input_sets.len() < horizon {
        return Err(HarnessError::config(
            "input_set",
            format!(
                "sequence horizon {horizon} exceeds configured {} input sets",
                v.input_sets.len()
            ),
        ));
    }
    let sys = v.system.as_nonlinear();
    let tol = v.config.verification.tolerance;
    let results = parallel::map_indexed(trials, |trial| {
        containment_trial(seq, v, &sys, horizon, master_seed, trial, tol)
    });

    let mut passes = 0usize;
    let mut failures = Vec::new();
    let mut mc_states: Vec<Vec<Vec<f64>>> = vec![Vec::new(); horizon + 1];
    for (trial, (states, violation)) in results.into_iter().enumerate() {
        match violation {
            None => passes += 1,
            Some((step, state)) => {
                if failures.len() < FAILURES_KEPT {
                    failures.push(ContainmentFailure {
                        trial,
                        step,
                        state: state.iter().copied().collect(),
                    });
                }
            }
        }
        if trial < MC_STATES_KEPT {
            for (k, x) in states.iter().enumerate() {
                mc_states[k].push(x.iter().copied().collect());
            }
        }
    }
    Ok((
        ContainmentTally {
            trials,
            passes,
            failures,
        },
        mc_states,
    ))
}

fn containment_trial(
    seq: &ReachSequence,
    v: &ValidatedExperiment,
    sys: &NonlinearSystem,
    horizon: usize,
    master_seed: u64,
    trial: usize,
    tol: f64,
) -> (Vec<Vector>, Option<(usize, Vector)>) {
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(master_seed, SEED_DOMAIN_VERIFY, trial as u64));
    let x0 = v.initial_set.sample(&mut rng);
    let inputs: Vec<Vector> = (0..horizon).map(|k| v.input_sets[k].sample(&mut rng)).collect();
    let noise = NoiseModel::new(v.noise_set.clone());
    let tr = simulate_nonlinear_with_rng(sys, &x0, &inputs, &noise, &mut rng)
        .expect("dimensions validated");
    let mut violation = None;
    for (k, x) in tr.states.iter().enumerate() {
        if !seq.sets[k]
            .contains_point(x, tol)
            .expect("dimensions validated")
        {
            violation = Some((k, x.clone()));
            break;
        }
    }
    (tr.states, violation)
}
