//! Reachability for unknown Lipschitz nonlinear systems: per-step
//! least-squares linearization from data, a data-driven enclosure of the
//! model mismatch plus linearization remainder, and an optional Lipschitz
//! covering term for points of the reachable tube not represented in the
//! data.

use serde::{Deserialize, Serialize};

use crate::data::{build_noise_matrix_zonotope, TrajectoryData};
use crate::linear_reach::{ReachMeta, ReachMode, ReachSequence};
use crate::sets::{MatrixZonotope, Sign, Zonotope};
use crate::{Matrix, ReachError, Result, Vector};

/// Point `z* = [x*; u*]` around which the affine model is fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationPoint {
    pub x_star: Vector,
    pub u_star: Vector,
}

impl LinearizationPoint {
    pub fn new(x_star: Vector, u_star: Vector) -> Self {
        LinearizationPoint { x_star, u_star }
    }

    pub fn z_star(&self) -> Vector {
        let n = self.x_star.len();
        let m = self.u_star.len();
        Vector::from_fn(n + m, |i, _| {
            if i < n {
                self.x_star[i]
            } else {
                self.u_star[i - n]
            }
        })
    }
}

/// Where a Lipschitz bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzSource {
    UserSupplied,
    Estimated,
}

/// A Lipschitz constant together with the covering radius (dispersion) of
/// the data, the two ingredients of the covering term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzInfo {
    pub l_star: f64,
    pub delta: f64,
    pub source: LipschitzSource,
}

impl LipschitzInfo {
    pub fn supplied(l_star: f64, delta: f64) -> Result<Self> {
        if l_star < 0.0 || delta < 0.0 {
            return Err(ReachError::InvalidArgument(
                "Lipschitz constant and dispersion must be >= 0".into(),
            ));
        }
        Ok(LipschitzInfo {
            l_star,
            delta,
            source: LipschitzSource::UserSupplied,
        })
    }

    pub fn estimated(data: &TrajectoryData) -> Result<Self> {
        Ok(LipschitzInfo {
            l_star: estimate_lipschitz(data)?,
            delta: estimate_dispersion(data)?,
            source: LipschitzSource::Estimated,
        })
    }
}

/// How to account for behavior between data points.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonMode {
    /// Drop the covering term; the result is flagged not formally
    /// guaranteed.
    Neglect,
    /// Estimate the Lipschitz constant and dispersion from the data.
    Estimated,
    /// Use caller-supplied values.
    Supplied { l_star: f64, delta: f64 },
}

/// The shifted regressor `[1; X_minus - x*; U_minus - u*]` of shape
/// `(1 + n + m) x T`.
pub fn augmented_data_matrix(data: &TrajectoryData, point: &LinearizationPoint) -> Matrix {
    augmented_data_matrix_raw(data, &point.x_star, &point.u_star)
}

pub(crate) fn augmented_data_matrix_raw(
    data: &TrajectoryData,
    x_star: &Vector,
    u_star: &Vector,
) -> Matrix {
    let n = data.state_dim();
    let m = data.input_dim();
    let t = data.total_transitions();
    Matrix::from_fn(1 + n + m, t, |i, j| {
        if i == 0 {
            1.0
        } else if i <= n {
            data.x_minus()[(i - 1, j)] - x_star[i - 1]
        } else {
            data.u_minus()[(i - 1 - n, j)] - u_star[i - 1 - n]
        }
    })
}

/// Least-squares affine model around the linearization point:
/// `M = (X_plus - C_Mw) D` with `D` the minimum-norm right-inverse of the
/// shifted regressor. Column 0 estimates `f(z*)`, the remaining blocks the
/// state and input Jacobians.
pub fn lsq_linearized_model(
    data: &TrajectoryData,
    point: &LinearizationPoint,
    noise_center: &Matrix,
) -> Result<Matrix> {
    if noise_center.shape() != (data.state_dim(), data.total_transitions()) {
        return Err(ReachError::dim(
            "lsq_linearized_model",
            format!("{}x{}", data.state_dim(), data.total_transitions()),
            format!("{}x{}", noise_center.nrows(), noise_center.ncols()),
        ));
    }
    let xi = augmented_data_matrix(data, point);
    let d = crate::data::right_inverse(&xi)?;
    Ok((data.x_plus() - noise_center) * d)
}

/// Matrix zonotope of per-column fit residuals:
/// center `X_plus - C_Mw - M Xi`, generators inherited (negated) from the
/// noise matrix zonotope. Column `i` over-approximates the model mismatch
/// plus remainder at data point `i`.
pub fn mismatch_matrix_zonotope(
    model: &Matrix,
    data: &TrajectoryData,
    noise_matrix: &MatrixZonotope,
    point: &LinearizationPoint,
) -> Result<MatrixZonotope> {
    let n = data.state_dim();
    let t = data.total_transitions();
    if noise_matrix.nrows() != n || noise_matrix.ncols() != t {
        return Err(ReachError::dim(
            "mismatch_matrix_zonotope",
            format!("{n}x{t}"),
            format!("{}x{}", noise_matrix.nrows(), noise_matrix.ncols()),
        ));
    }
    if model.shape() != (n, 1 + n + data.input_dim()) {
        return Err(ReachError::dim(
            "mismatch_matrix_zonotope",
            format!("{}x{}", n, 1 + n + data.input_dim()),
            format!("{}x{}", model.nrows(), model.ncols()),
        ));
    }
    let xi = augmented_data_matrix(data, point);
    let predicted = model * xi;
    noise_matrix.affine(&(data.x_plus() - predicted), Sign::Minus)
}

/// Collapse the residual matrix zonotope to one zonotope consistent with
/// every data column: convert to an interval matrix, take per-row extremes
/// across columns, and box the result.
pub fn lagrange_zonotope(residuals: &MatrixZonotope) -> Zonotope {
    let (lo, hi) = residuals.to_interval_matrix().rowwise_bounds();
    Zonotope::from_interval(&lo, &hi).expect("rowwise bounds are ordered")
}

/// Largest pairwise slope `||f(z_i) - f(z_j)|| / ||z_i - z_j||` over the
/// data, using the noisy successors as the `f` values (which can only
/// inflate the estimate). Pairs closer than 1e-12 are skipped.
pub fn estimate_lipschitz(data: &TrajectoryData) -> Result<f64> {
    let t = data.total_transitions();
    if t < 2 {
        return Err(ReachError::EmptyInput("need at least two data points"));
    }
    let zs: Vec<Vector> = (0..t).map(|i| data.z_column(i)).collect();
    let mut best: Option<f64> = None;
    for i in 0..t {
        for j in (i + 1)..t {
            let dz = (&zs[i] - &zs[j]).norm();
            if dz < 1e-12 {
                continue;
            }
            let df = (data.x_plus().column(i) - data.x_plus().column(j)).norm();
            let slope = df / dz;
            if best.map_or(true, |b| slope > b) {
                best = Some(slope);
            }
        }
    }
    best.ok_or(ReachError::EmptyInput("all data point pairs are degenerate"))
}

/// Dispersion of the data points: the largest nearest-neighbor distance
/// among the `z_i`.
pub fn estimate_dispersion(data: &TrajectoryData) -> Result<f64> {
    let t = data.total_transitions();
    if t < 2 {
        return Err(ReachError::EmptyInput("need at least two data points"));
    }
    let zs: Vec<Vector> = (0..t).map(|i| data.z_column(i)).collect();
    let mut worst = 0.0_f64;
    for i in 0..t {
        let mut nearest = f64::INFINITY;
        for j in 0..t {
            if i != j {
                nearest = nearest.min((&zs[i] - &zs[j]).norm());
            }
        }
        worst = worst.max(nearest);
    }
    Ok(worst)
}

/// Centered box of half-width `l_star * delta` per axis, covering the
/// possible variation of `f` between any tube point and its nearest data
/// point.
pub fn epsilon_zonotope(l_star: f64, delta: f64, dim: usize) -> Result<Zonotope> {
    if l_star < 0.0 || delta < 0.0 {
        return Err(ReachError::InvalidArgument(
            "epsilon zonotope requires l_star, delta >= 0".into(),
        ));
    }
    let radius = l_star * delta;
    let half = Vector::from_element(dim, radius);
    Zonotope::from_interval(&(-&half), &half)
}

/// Per-step diagnostics emitted by [`propagate_nonlinear`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub k: usize,
    pub z_star: Vec<f64>,
    pub rank_ok: bool,
    pub sigma_min: f64,
    pub z_l_lower: Vec<f64>,
    pub z_l_upper: Vec<f64>,
    pub l_star: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon_used: f64,
}

/// Data-driven propagation for nonlinear dynamics. Each step re-linearizes
/// at the centers of the current state and input sets, refits the affine
/// model, rebuilds the residual enclosure, and advances
/// `R_{k+1} = M (1 x (R_k - x*) x (U_k - u*)) + Z_w + Z_L (+ Z_eps)`.
///
/// In [`EpsilonMode::Neglect`] the covering term is omitted and the result
/// is flagged non-guaranteed in its metadata.
pub fn propagate_nonlinear(
    data: &TrajectoryData,
    initial: &Zonotope,
    inputs: &[Zonotope],
    noise_bound: &Zonotope,
    horizon: usize,
    epsilon: &EpsilonMode,
    max_order: f64,
) -> Result<(ReachSequence, Vec<StepDiagnostic>)> {
    let n = data.state_dim();
    let m = data.input_dim();
    if initial.dim() != n {
        return Err(ReachError::dim("propagate_nonlinear initial", n, initial.dim()));
    }
    if noise_bound.dim() != n {
        return Err(ReachError::dim("propagate_nonlinear noise", n, noise_bound.dim()));
    }
    if inputs.len() < horizon {
        return Err(ReachError::dim(
            "propagate_nonlinear inputs",
            format!("{horizon} input sets"),
            format!("{}", inputs.len()),
        ));
    }

    let noise_matrix = build_noise_matrix_zonotope(noise_bound, data.total_transitions())?;
    let lipschitz = match epsilon {
        EpsilonMode::Neglect => None,
        EpsilonMode::Estimated => Some(LipschitzInfo::estimated(data)?),
        EpsilonMode::Supplied { l_star, delta } => Some(LipschitzInfo::supplied(*l_star, *delta)?),
    };
    let covering = lipschitz
        .as_ref()
        .map(|li| epsilon_zonotope(li.l_star, li.delta, n))
        .transpose()?;
    let one = Zonotope::singleton(Vector::from_element(1, 1.0));

    let mut sets = Vec::with_capacity(horizon + 1);
    let mut diagnostics = Vec::with_capacity(horizon);
    sets.push(initial.clone());
    for k in 0..horizon {
        if inputs[k].dim() != m {
            return Err(ReachError::dim("propagate_nonlinear input", m, inputs[k].dim()));
        }
        let point = LinearizationPoint::new(sets[k].center().clone(), inputs[k].center().clone());
        let xi = augmented_data_matrix(data, &point);
        let (d, sigma_min, _sigma_max) =
            crate::data::right_inverse_with_report(&xi).map_err(|e| match e {
                ReachError::RankDeficient {
                    rank,
                    required,
                    sigma_min,
                    sigma_max,
                    tol,
                    ..
                } => ReachError::RankDeficient {
                    rank,
                    required,
                    sigma_min,
                    sigma_max,
                    tol,
                    at_step: format!(" at step {k}"),
                },
                other => other,
            })?;
        let model = (data.x_plus() - noise_matrix.center()) * &d;
        let residuals = mismatch_matrix_zonotope(&model, data, &noise_matrix, &point)?;
        let z_l = lagrange_zonotope(&residuals);

        let shifted_state = sets[k].translate(&(-&point.x_star))?;
        let shifted_input = inputs[k].translate(&(-&point.u_star))?;
        let stacked = one
            .cartesian_product(&shifted_state)
            .cartesian_product(&shifted_input);
        let mut next = MatrixZonotope::singleton(model)
            .mul_zonotope(&stacked)?
            .minkowski_sum(noise_bound)?
            .minkowski_sum(&z_l)?;
        if let Some(z_eps) = &covering {
            next = next.minkowski_sum(z_eps)?;
        }
        let next = next.reduce_order(max_order);

        let (zl_lo, zl_hi) = z_l.interval_hull();
        diagnostics.push(StepDiagnostic {
            k,
            z_star: point.z_star().iter().copied().collect(),
            rank_ok: true,
            sigma_min,
            z_l_lower: zl_lo.iter().copied().collect(),
            z_l_upper: zl_hi.iter().copied().collect(),
            l_star: lipschitz.as_ref().map(|li| li.l_star),
            delta: lipschitz.as_ref().map(|li| li.delta),
            epsilon_used: lipschitz.as_ref().map_or(0.0, |li| li.l_star * li.delta),
        });
        sets.push(next);
    }
    let generator_counts = sets.iter().map(Zonotope::num_generators).collect();
    let guaranteed = !matches!(epsilon, EpsilonMode::Neglect);
    Ok((
        ReachSequence {
            sets,
            meta: ReachMeta {
                mode: ReachMode::DataDrivenNonlinear,
                horizon,
                max_order,
                generator_counts,
                guaranteed,
            },
        },
        diagnostics,
    ))
}
