//! Internal linear program: minimize `||beta||_inf` subject to `A beta = b`.
//!
//! Zonotope membership reduces to this problem: a point `x` lies in
//! `<c, G>` iff the optimal value of `min ||beta||_inf s.t. G beta = x - c`
//! is at most 1. The solver is a dense two-phase simplex with a Bland-rule
//! fallback against cycling. Callers must treat the returned `beta` as a
//! certificate and re-verify the residual in the original problem scale.

use crate::{Matrix, Vector};

pub(crate) struct LpSolution {
    pub beta: Vector,
    /// Optimal value of `max_i |beta_i|`.
    pub t: f64,
}

const EPS_PIVOT: f64 = 1e-9;
const EPS_COST: f64 = 1e-9;

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    obj: Vec<f64>,
    obj_rhs: f64,
    basis: Vec<usize>,
    /// Columns `>= allowed` are never selected as entering variables.
    allowed: usize,
}

impl Simplex {
    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.rows[r][c];
        let inv = 1.0 / pv;
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pr) in self.rows[i].iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
                self.rows[i][c] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-11 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pr) in self.obj.iter_mut().zip(pivot_row.iter()) {
                *v -= f * pr;
            }
            self.obj[c] = 0.0;
            self.obj_rhs -= f * pivot_rhs;
        }
        self.basis[r] = c;
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        if bland {
            return (0..self.allowed).find(|&j| self.obj[j] < -EPS_COST);
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.allowed {
            let c = self.obj[j];
            if c < -EPS_COST && best.map_or(true, |(_, bc)| c < bc) {
                best = Some((j, c));
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows.len() {
            let coef = self.rows[i][c];
            if coef > EPS_PIVOT {
                let ratio = self.rhs[i] / coef;
                let better = match best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < br - 1e-12
                            || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn run(&mut self) -> Phase {
        let max_iter = 400 + 60 * (self.rows.len() + self.allowed);
        let bland_after = 40 + 10 * (self.rows.len() + self.allowed);
        let mut stalled = 0usize;
        let mut last_obj = self.obj_rhs;
        for iter in 0..max_iter {
            let bland = stalled > bland_after || iter > max_iter / 2;
            let Some(c) = self.entering(bland) else {
                return Phase::Optimal;
            };
            let Some(r) = self.leaving(c) else {
                return Phase::Unbounded;
            };
            self.pivot(r, c);
            if (last_obj - self.obj_rhs).abs() <= 1e-13 {
                stalled += 1;
            } else {
                stalled = 0;
                last_obj = self.obj_rhs;
            }
        }
        Phase::IterationLimit
    }
}

/// Solve `min ||beta||_inf  s.t.  a * beta = b`.
///
/// Returns `None` when the system is infeasible or the solve failed
/// numerically. Feasibility of the certificate must be checked by the
/// caller against the unscaled data.
pub(crate) fn min_inf_norm(a: &Matrix, b: &Vector) -> Option<LpSolution> {
    let k = a.nrows();
    let g = a.ncols();
    assert_eq!(b.len(), k, "rhs length must match row count");
    if g == 0 {
        return if k == 0 || b.amax() <= 1e-12 {
            Some(LpSolution {
                beta: Vector::zeros(0),
                t: 0.0,
            })
        } else {
            None
        };
    }

    // Row-equilibrate the equality block and flip signs so rhs >= 0.
    // Scaling a row of (A, b) leaves the solution set unchanged.
    let mut a_s = a.clone();
    let mut b_s = b.clone();
    for i in 0..k {
        let m = a_s.row(i).amax().max(b_s[i].abs());
        if m > 1e-300 {
            let inv = 1.0 / m;
            for j in 0..g {
                a_s[(i, j)] *= inv;
            }
            b_s[i] *= inv;
        }
        if b_s[i] < 0.0 {
            for j in 0..g {
                a_s[(i, j)] = -a_s[(i, j)];
            }
            b_s[i] = -b_s[i];
        }
    }

    // Variables: beta = p - q with p, q >= 0; slack s and bound t with
    // p_i + q_i + s_i - t = 0, so max|beta_i| <= t. Artificials for the
    // equality rows give a trivially feasible phase-1 start.
    let col_p = 0;
    let col_q = g;
    let col_s = 2 * g;
    let col_t = 3 * g;
    let col_art = 3 * g + 1;
    let ncols = 3 * g + 1 + k;
    let nrows = k + g;

    let mut rows = vec![vec![0.0; ncols]; nrows];
    let mut rhs = vec![0.0; nrows];
    let mut basis = vec![0usize; nrows];
    for i in 0..k {
        for j in 0..g {
            rows[i][col_p + j] = a_s[(i, j)];
            rows[i][col_q + j] = -a_s[(i, j)];
        }
        rows[i][col_art + i] = 1.0;
        rhs[i] = b_s[i];
        basis[i] = col_art + i;
    }
    for j in 0..g {
        let r = k + j;
        rows[r][col_p + j] = 1.0;
        rows[r][col_q + j] = 1.0;
        rows[r][col_s + j] = 1.0;
        rows[r][col_t] = -1.0;
        basis[r] = col_s + j;
    }

    // Phase 1: minimize the sum of artificials.
    let mut obj = vec![0.0; ncols];
    let mut obj_rhs = 0.0;
    for i in 0..k {
        for j in 0..ncols {
            obj[j] -= rows[i][j];
        }
        obj_rhs -= rhs[i];
    }
    for i in 0..k {
        obj[col_art + i] = 0.0;
    }
    let mut sx = Simplex {
        rows,
        rhs,
        obj,
        obj_rhs,
        basis,
        allowed: ncols,
    };
    match sx.run() {
        Phase::Optimal => {}
        _ => return None,
    }
    // obj_rhs holds minus the phase-1 objective value.
    if -sx.obj_rhs > 1e-8 * (1.0 + k as f64) {
        return None;
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < sx.rows.len() {
        if sx.basis[r] >= col_art {
            let piv = (0..col_art).find(|&c| sx.rows[r][c].abs() > EPS_PIVOT);
            match piv {
                Some(c) => sx.pivot(r, c),
                None => {
                    sx.rows.remove(r);
                    sx.rhs.remove(r);
                    sx.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2: minimize t, never re-entering artificial columns.
    sx.allowed = col_art;
    sx.obj = vec![0.0; ncols];
    sx.obj[col_t] = 1.0;
    sx.obj_rhs = 0.0;
    for i in 0..sx.rows.len() {
        if sx.basis[i] == col_t {
            let row = sx.rows[i].clone();
            for (v, rv) in sx.obj.iter_mut().zip(row.iter()) {
                *v -= rv;
            }
            sx.obj_rhs -= sx.rhs[i];
        }
    }
    match sx.run() {
        Phase::Optimal => {}
        _ => return None,
    }

    let mut values = vec![0.0; ncols];
    for (i, &bv) in sx.basis.iter().enumerate() {
        values[bv] = sx.rhs[i];
    }
    let beta = Vector::from_iterator(g, (0..g).map(|j| values[col_p + j] - values[col_q + j]));
    let t = beta.amax();
    Some(LpSolution { beta, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &Matrix, beta: &Vector, b: &Vector) -> f64 {
        (a * beta - b).amax()
    }

    #[test]
    fn single_row_closed_form() {
        // min ||beta||_inf s.t. a' beta = b has optimum |b| / ||a||_1.
        let a = Matrix::from_row_slice(1, 3, &[2.0, -1.0, 0.5]);
        let b = Vector::from_row_slice(&[3.0]);
        let sol = min_inf_norm(&a, &b).expect("feasible");
        assert!((sol.t - 3.0 / 3.5).abs() < 1e-9, "t = {}", sol.t);
        assert!(residual(&a, &sol.beta, &b) < 1e-9);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = Matrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0]);
        let b = Vector::zeros(2);
        let sol = min_inf_norm(&a, &b).expect("feasible");
        assert!(sol.t <= 1e-10);
    }

    #[test]
    fn inconsistent_system_is_infeasible() {
        let a = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = Vector::from_row_slice(&[1.0, 2.0]);
        assert!(min_inf_norm(&a, &b).is_none());
    }

    #[test]
    fn random_feasible_instances_bounded_by_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let k = rng.random_range(1..=6);
            let g = rng.random_range(k..=k + 12);
            let a = Matrix::from_fn(k, g, |_, _| rng.random_range(-2.0..=2.0));
            let beta0 = Vector::from_fn(g, |_, _| rng.random_range(-1.0..=1.0));
            let b = &a * &beta0;
            let sol = min_inf_norm(&a, &b).unwrap_or_else(|| panic!("trial {trial} infeasible"));
            assert!(
                sol.t <= beta0.amax() + 1e-8,
                "trial {trial}: t = {} > construction bound {}",
                sol.t,
                beta0.amax()
            );
            assert!(residual(&a, &sol.beta, &b) < 1e-8);
        }
    }

    #[test]
    fn dual_directions_lower_bound_the_optimum() {
        // For any y, |y'b| / ||A'y||_1 lower-bounds min ||beta||_inf.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let k = rng.random_range(2..=5);
            let g = rng.random_range(k + 1..=k + 10);
            let a = Matrix::from_fn(k, g, |_, _| rng.random_range(-1.0..=1.0));
            let beta0 = Vector::from_fn(g, |_, _| rng.random_range(-3.0..=3.0));
            let b = &a * &beta0;
            let sol = min_inf_norm(&a, &b).expect("feasible by construction");
            for _ in 0..40 {
                let y = Vector::from_fn(k, |_, _| rng.random_range(-1.0..=1.0));
                let denom = (a.transpose() * &y).abs().sum();
                if denom > 1e-9 {
                    let bound = (y.dot(&b)).abs() / denom;
                    assert!(
                        sol.t >= bound - 1e-7,
                        "dual bound {bound} exceeds optimum {}",
                        sol.t
                    );
                }
            }
        }
    }
}
