//! Ground-truth systems, trajectory simulation, data-matrix assembly, and
//! the rank/right-inverse machinery the reachability pipelines consume.
//!
//! Data layout: `K` recorded trajectories of `T_i` transitions each are
//! stacked column-wise into `X_minus` (states at the start of each
//! transition), `X_plus` (states one step later), and `U_minus` (applied
//! inputs), with `T = sum T_i` total columns. Segment boundaries are
//! tracked so windows never mix trajectories.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sets::{MatrixZonotope, Zonotope};
use crate::{Matrix, ReachError, Result, Vector};

/// Relative rank tolerance: singular values below `tol * sigma_max` are
/// treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Known linear dynamics `x(k+1) = A x(k) + B u(k) + w(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(ReachError::dim(
                "LinearSystem::new",
                "square A",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != a.nrows() {
            return Err(ReachError::dim(
                "LinearSystem::new",
                format!("B with {} rows", a.nrows()),
                format!("{}", b.nrows()),
            ));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(ReachError::NonFinite("LinearSystem matrices"));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// The stacked `[A B]` block used by the model-based recursion.
    pub fn stacked(&self) -> Matrix {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut s = Matrix::zeros(n, n + m);
        s.view_mut((0, 0), (n, n)).copy_from(&self.a);
        s.view_mut((0, n), (n, m)).copy_from(&self.b);
        s
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

/// Unknown-to-the-analysis nonlinear dynamics `x(k+1) = f(x(k), u(k)) + w(k)`,
/// represented by an evaluation function.
#[derive(Clone)]
pub struct NonlinearSystem {
    state_dim: usize,
    input_dim: usize,
    f: Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>,
}

impl std::fmt::Debug for NonlinearSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearSystem")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .finish()
    }
}

impl NonlinearSystem {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        f: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        NonlinearSystem {
            state_dim,
            input_dim,
            f: Arc::new(f),
        }
    }

    /// Wrap linear dynamics; simulation through the wrapper is bit-identical
    /// to [`simulate_linear`] under the same seed.
    pub fn from_linear(sys: &LinearSystem) -> Self {
        let sys = sys.clone();
        NonlinearSystem::new(sys.state_dim(), sys.input_dim(), move |x, u| sys.step(x, u))
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        (self.f)(x, u)
    }
}

/// Bounded process noise `w(k) in Z_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    bound: Zonotope,
}

impl NoiseModel {
    pub fn new(bound: Zonotope) -> Self {
        NoiseModel { bound }
    }

    /// Noise-free model: the singleton `{0}`.
    pub fn zero(dim: usize) -> Self {
        NoiseModel {
            bound: Zonotope::singleton(Vector::zeros(dim)),
        }
    }

    pub fn bound(&self) -> &Zonotope {
        &self.bound
    }

    /// Draw a noise realization, uniform over the coefficient cube, so it
    /// is a member of the bound by construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        self.bound.sample(rng)
    }
}

/// One simulated trajectory with its recorded noise realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub noises: Vec<Vector>,
}

impl Trajectory {
    /// Number of recorded transitions.
    pub fn transitions(&self) -> usize {
        self.inputs.len()
    }
}

/// Simulate nonlinear dynamics for `inputs.len()` steps with noise drawn
/// from the model. Deterministic given the seed.
pub fn simulate_nonlinear(
    sys: &NonlinearSystem,
    x0: &Vector,
    inputs: &[Vector],
    noise: &NoiseModel,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_nonlinear_with_rng(sys, x0, inputs, noise, &mut rng)
}

/// As [`simulate_nonlinear`] but drawing noise from a caller-owned RNG.
pub fn simulate_nonlinear_with_rng<R: Rng + ?Sized>(
    sys: &NonlinearSystem,
    x0: &Vector,
    inputs: &[Vector],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Trajectory> {
    if x0.len() != sys.state_dim() {
        return Err(ReachError::dim("simulate", sys.state_dim(), x0.len()));
    }
    if noise.bound().dim() != sys.state_dim() {
        return Err(ReachError::dim(
            "simulate noise",
            sys.state_dim(),
            noise.bound().dim(),
        ));
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut noises = Vec::with_capacity(inputs.len());
    states.push(x0.clone());
    for u in inputs {
        if u.len() != sys.input_dim() {
            return Err(ReachError::dim("simulate input", sys.input_dim(), u.len()));
        }
        let w = noise.sample(rng);
        let x = states.last().expect("non-empty");
        let next = sys.step(x, u) + &w;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(ReachError::NonFinite("simulated state"));
        }
        states.push(next);
        noises.push(w);
    }
    Ok(Trajectory {
        states,
        inputs: inputs.to_vec(),
        noises,
    })
}

/// Simulate linear dynamics; see [`simulate_nonlinear`].
pub fn simulate_linear(
    sys: &LinearSystem,
    x0: &Vector,
    inputs: &[Vector],
    noise: &NoiseModel,
    seed: u64,
) -> Result<Trajectory> {
    simulate_nonlinear(&NonlinearSystem::from_linear(sys), x0, inputs, noise, seed)
}

/// As [`simulate_linear`] but drawing noise from a caller-owned RNG.
pub fn simulate_linear_with_rng<R: Rng + ?Sized>(
    sys: &LinearSystem,
    x0: &Vector,
    inputs: &[Vector],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Trajectory> {
    simulate_nonlinear_with_rng(&NonlinearSystem::from_linear(sys), x0, inputs, noise, rng)
}

/// Stacked data matrices from one or more trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    x_minus: Matrix,
    x_plus: Matrix,
    u_minus: Matrix,
    lengths: Vec<usize>,
    seed: u64,
}

impl TrajectoryData {
    /// Concatenate trajectories into the block data layout. Requires at
    /// least one trajectory with at least one transition each.
    pub fn assemble(trajectories: &[Trajectory], seed: u64) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(ReachError::EmptyInput("no trajectories"));
        }
        let n = trajectories[0].states[0].len();
        let m = trajectories[0]
            .inputs
            .first()
            .map(|u| u.len())
            .ok_or(ReachError::EmptyInput("trajectory without transitions"))?;
        let mut lengths = Vec::with_capacity(trajectories.len());
        let mut total = 0usize;
        for tr in trajectories {
            if tr.states.len() != tr.inputs.len() + 1 || tr.inputs.is_empty() {
                return Err(ReachError::dim(
                    "TrajectoryData::assemble",
                    format!("{} states", tr.inputs.len() + 1),
                    format!("{}", tr.states.len()),
                ));
            }
            if tr.states.iter().any(|x| x.len() != n)
                || tr.inputs.iter().any(|u| u.len() != m)
            {
                return Err(ReachError::dim(
                    "TrajectoryData::assemble",
                    format!("state dim {n}, input dim {m}"),
                    "mixed dimensions".to_string(),
                ));
            }
            lengths.push(tr.inputs.len());
            total += tr.inputs.len();
        }
        let mut x_minus = Matrix::zeros(n, total);
        let mut x_plus = Matrix::zeros(n, total);
        let mut u_minus = Matrix::zeros(m, total);
        let mut col = 0;
        for tr in trajectories {
            for k in 0..tr.inputs.len() {
                x_minus.set_column(col, &tr.states[k]);
                x_plus.set_column(col, &tr.states[k + 1]);
                u_minus.set_column(col, &tr.inputs[k]);
                col += 1;
            }
        }
        TrajectoryData::from_parts(x_minus, x_plus, u_minus, lengths, seed)
    }

    /// Build directly from data matrices. Column counts must agree with the
    /// segment lengths, and within each segment `X_plus` column `j` must
    /// equal `X_minus` column `j + 1` (the shifted-window layout).
    pub fn from_parts(
        x_minus: Matrix,
        x_plus: Matrix,
        u_minus: Matrix,
        lengths: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        let total: usize = lengths.iter().sum();
        if total == 0 {
            return Err(ReachError::EmptyInput("zero total transitions"));
        }
        if x_minus.ncols() != total || x_plus.ncols() != total || u_minus.ncols() != total {
            return Err(ReachError::dim(
                "TrajectoryData::from_parts",
                format!("{total} columns"),
                format!(
                    "{}/{}/{}",
                    x_minus.ncols(),
                    x_plus.ncols(),
                    u_minus.ncols()
                ),
            ));
        }
        if x_plus.nrows() != x_minus.nrows() {
            return Err(ReachError::dim(
                "TrajectoryData::from_parts",
                format!("{} state rows", x_minus.nrows()),
                format!("{}", x_plus.nrows()),
            ));
        }
        let mut offset = 0;
        for &len in &lengths {
            for j in 0..len.saturating_sub(1) {
                if x_plus.column(offset + j) != x_minus.column(offset + j + 1) {
                    return Err(ReachError::InvalidArgument(format!(
                        "shifted-window mismatch at data column {}",
                        offset + j
                    )));
                }
            }
            offset += len;
        }
        Ok(TrajectoryData {
            x_minus,
            x_plus,
            u_minus,
            lengths,
            seed,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.x_minus.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u_minus.nrows()
    }

    /// Total number of data columns `T`.
    pub fn total_transitions(&self) -> usize {
        self.x_minus.ncols()
    }

    pub fn x_minus(&self) -> &Matrix {
        &self.x_minus
    }

    pub fn x_plus(&self) -> &Matrix {
        &self.x_plus
    }

    pub fn u_minus(&self) -> &Matrix {
        &self.u_minus
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stacked regressor `[X_minus; U_minus]` of shape `(n+m) x T`.
    pub fn stacked_state_input(&self) -> Matrix {
        let n = self.state_dim();
        let m = self.input_dim();
        let t = self.total_transitions();
        let mut s = Matrix::zeros(n + m, t);
        s.view_mut((0, 0), (n, t)).copy_from(&self.x_minus);
        s.view_mut((n, 0), (m, t)).copy_from(&self.u_minus);
        s
    }

    /// Stacked sample points `z_i = [x_i; u_i]`, one per data column.
    pub fn z_column(&self, i: usize) -> Vector {
        let n = self.state_dim();
        let m = self.input_dim();
        Vector::from_fn(n + m, |r, _| {
            if r < n {
                self.x_minus[(r, i)]
            } else {
                self.u_minus[(r - n, i)]
            }
        })
    }

    /// Slice the block matrices back into per-trajectory pieces
    /// `(states, inputs)`; exact inverse of [`TrajectoryData::assemble`]
    /// up to the recorded noises.
    pub fn segments(&self) -> Vec<(Vec<Vector>, Vec<Vector>)> {
        let mut out = Vec::with_capacity(self.lengths.len());
        let mut offset = 0;
        for &len in &self.lengths {
            let mut states = Vec::with_capacity(len + 1);
            let mut inputs = Vec::with_capacity(len);
            for j in 0..len {
                states.push(Vector::from(self.x_minus.column(offset + j)));
                inputs.push(Vector::from(self.u_minus.column(offset + j)));
            }
            states.push(Vector::from(self.x_plus.column(offset + len - 1)));
            out.push((states, inputs));
            offset += len;
        }
        out
    }

    /// CSV rendering: one row per data column with the state, input, and
    /// segment id of that transition's start.
    pub fn to_csv(&self) -> String {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut s = String::new();
        for i in 0..n {
            s.push_str(&format!("x{},", i + 1));
        }
        for j in 0..m {
            s.push_str(&format!("u{},", j + 1));
        }
        s.push_str("segment\n");
        let mut seg = 0usize;
        let mut seg_end = self.lengths[0];
        for col in 0..self.total_transitions() {
            while col >= seg_end {
                seg += 1;
                seg_end += self.lengths[seg];
            }
            for i in 0..n {
                s.push_str(&format!("{},", self.x_minus[(i, col)]));
            }
            for j in 0..m {
                s.push_str(&format!("{},", self.u_minus[(j, col)]));
            }
            s.push_str(&format!("{seg}\n"));
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDataRepr {
    #[serde(rename = "X_minus")]
    x_minus: Vec<Vec<f64>>,
    #[serde(rename = "X_plus")]
    x_plus: Vec<Vec<f64>>,
    #[serde(rename = "U_minus")]
    u_minus: Vec<Vec<f64>>,
    lengths: Vec<usize>,
    seed: u64,
}

impl Serialize for TrajectoryData {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TrajectoryDataRepr {
            x_minus: crate::sets::matrix_to_rows(&self.x_minus),
            x_plus: crate::sets::matrix_to_rows(&self.x_plus),
            u_minus: crate::sets::matrix_to_rows(&self.u_minus),
            lengths: self.lengths.clone(),
            seed: self.seed,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TrajectoryData {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = TrajectoryDataRepr::deserialize(deserializer)?;
        let x_minus =
            crate::sets::rows_to_matrix(&repr.x_minus, "X_minus").map_err(D::Error::custom)?;
        let x_plus =
            crate::sets::rows_to_matrix(&repr.x_plus, "X_plus").map_err(D::Error::custom)?;
        let mut u_minus =
            crate::sets::rows_to_matrix(&repr.u_minus, "U_minus").map_err(D::Error::custom)?;
        // An input-free system serializes U_minus as [], losing the column
        // count; restore it from the state block.
        if u_minus.nrows() == 0 {
            u_minus = Matrix::zeros(0, x_minus.ncols());
        }
        TrajectoryData::from_parts(x_minus, x_plus, u_minus, repr.lengths, repr.seed)
            .map_err(D::Error::custom)
    }
}

/// Lift a per-step noise bound to the matrix-zonotope over all stacked
/// noise matrices: the center repeats the noise center in every column,
/// and each (noise generator, column) pair contributes one generator
/// matrix that places that generator in that column.
pub fn build_noise_matrix_zonotope(bound: &Zonotope, t: usize) -> Result<MatrixZonotope> {
    if t < 1 {
        return Err(ReachError::InvalidArgument(
            "noise matrix zonotope needs t >= 1".into(),
        ));
    }
    let n = bound.dim();
    let center = Matrix::from_fn(n, t, |i, _| bound.center()[i]);
    let mut gens = Vec::with_capacity(bound.num_generators() * t);
    for i in 0..bound.num_generators() {
        for j in 0..t {
            let mut g = Matrix::zeros(n, t);
            g.set_column(j, &bound.generators().column(i));
            gens.push(g);
        }
    }
    MatrixZonotope::new(center, gens)
}

/// Minimum-norm right-inverse `H` with `M H = I`, via SVD, using the
/// default rank tolerance.
pub fn right_inverse(m: &Matrix) -> Result<Matrix> {
    right_inverse_with_tol(m, DEFAULT_RANK_TOL)
}

/// As [`right_inverse`] with an explicit relative rank tolerance. Fails
/// with [`ReachError::RankDeficient`] when the matrix does not have full
/// row rank at that tolerance, i.e. the data is not sufficiently exciting.
pub fn right_inverse_with_tol(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let p = m.nrows();
    let t = m.ncols();
    if p == 0 {
        return Ok(Matrix::zeros(t, 0));
    }
    if t < p {
        return Err(ReachError::RankDeficient {
            rank: t,
            required: p,
            sigma_min: 0.0,
            sigma_max: 0.0,
            tol: rank_tol,
            at_step: String::new(),
        });
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let tol = rank_tol * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(ReachError::RankDeficient {
            rank,
            required: p,
            sigma_min,
            sigma_max,
            tol,
            at_step: String::new(),
        });
    }
    svd.pseudo_inverse(tol)
        .map_err(|e| ReachError::InvalidArgument(format!("pseudo-inverse failed: {e}")))
}

/// Right-inverse plus the extreme singular values, for diagnostics.
pub(crate) fn right_inverse_with_report(m: &Matrix) -> Result<(Matrix, f64, f64)> {
    let (sigma_min, sigma_max) = if m.nrows() > 0 && m.ncols() > 0 {
        let sv = m.clone().svd(false, false).singular_values;
        (sv.min(), sv.max())
    } else {
        (0.0, 0.0)
    };
    let h = right_inverse(m)?;
    Ok((h, sigma_min, sigma_max))
}

/// Which stacked matrix the excitation check applies to.
#[derive(Debug, Clone, PartialEq)]
pub enum RankMode {
    /// `[X_minus; U_minus]`, required rank `n + m`.
    Linear,
    /// `[1; X_minus - x*; U_minus - u*]`, required rank `1 + n + m`.
    Affine { x_star: Vector, u_star: Vector },
}

/// Diagnostic record for the excitation rank condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub mode: String,
    pub rows: usize,
    pub cols: usize,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub required: usize,
    pub passed: bool,
}

/// Report the singular values and numerical rank of the stacked data
/// matrix against the full-row-rank requirement.
pub fn rank_report(data: &TrajectoryData, mode: &RankMode) -> RankReport {
    let (stacked, label) = match mode {
        RankMode::Linear => (data.stacked_state_input(), "linear"),
        RankMode::Affine { x_star, u_star } => (
            crate::nonlinear_reach::augmented_data_matrix_raw(data, x_star, u_star),
            "affine",
        ),
    };
    let required = stacked.nrows();
    let svd = stacked.clone().svd(false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|&&s| s > DEFAULT_RANK_TOL * sigma_max && s > 0.0)
        .count();
    RankReport {
        mode: label.to_string(),
        rows: stacked.nrows(),
        cols: stacked.ncols(),
        singular_values,
        rank,
        required,
        passed: rank >= required,
    }
}

/// Deterministically derive an independent sub-seed from a master seed, a
/// domain tag, and an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    let mut z = master
        ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
