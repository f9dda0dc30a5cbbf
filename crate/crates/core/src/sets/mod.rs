//! Set representations: zonotopes, matrix zonotopes, and interval matrices.
//!
//! All types are immutable values; every operation is a pure function, so
//! they are safe to share across threads. Zero-width generators (all-zero
//! columns or all-zero generator matrices) are dropped on construction:
//! they do not change the represented set.

mod interval_matrix;
mod matrix_zonotope;
mod zonotope;

pub use interval_matrix::IntervalMatrix;
pub use matrix_zonotope::MatrixZonotope;
pub use zonotope::Zonotope;

use crate::{Matrix, Result, Vector};

/// Sign selector for affine matrix-zonotope expressions `X + M` / `X - M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Decide whether `r` can be written as `gens * beta` with
/// `||beta||_inf <= 1 + tol`, and certify the answer.
///
/// Tries the minimum-norm least-squares coefficient first (cheap, and a
/// valid certificate whenever its infinity norm is small enough), then
/// falls back to an exact linear program. Either way the certificate's
/// residual is re-verified before answering `true`.
pub(crate) fn certify_member(gens: &Matrix, r: &Vector, tol: f64) -> bool {
    let scale = 1.0_f64.max(inf_norm(r));
    let res_tol = 1e-8 * scale;
    if gens.ncols() == 0 {
        return inf_norm(r) <= res_tol;
    }
    let svd = gens.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = (1e-13 * sigma_max).max(f64::MIN_POSITIVE);
    if let Ok(beta) = svd.solve(r, eps) {
        let residual = inf_norm(&(gens * &beta - r));
        if residual > res_tol {
            // The least-squares residual is the minimum achievable, so no
            // exact solution exists at all.
            return false;
        }
        if inf_norm(&beta) <= 1.0 + tol {
            return true;
        }
    }
    match crate::lp::min_inf_norm(gens, r) {
        Some(sol) => inf_norm(&(gens * &sol.beta - r)) <= res_tol && sol.t <= 1.0 + tol,
        None => false,
    }
}

/// Infinity norm that tolerates zero-length vectors.
pub(crate) fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Test whether a point lies inside (or on) a convex polygon given in
/// counterclockwise vertex order, within an absolute tolerance.
pub fn point_in_convex_polygon(polygon: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    match polygon.len() {
        0 => false,
        1 => (p[0] - polygon[0][0]).abs() <= tol && (p[1] - polygon[0][1]).abs() <= tol,
        2 => point_segment_distance(polygon[0], polygon[1], p) <= tol,
        _ => polygon.iter().enumerate().all(|(i, a)| {
            let b = polygon[(i + 1) % polygon.len()];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            cross >= -tol
        }),
    }
}

fn point_segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = p[0] - (a[0] + t * ab[0]);
    let dy = p[1] - (a[1] + t * ab[1]);
    (dx * dx + dy * dy).sqrt()
}

pub(crate) fn check_finite_matrix(m: &Matrix, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::ReachError::NonFinite(context))
    }
}

pub(crate) fn check_finite_vector(v: &Vector, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(crate::ReachError::NonFinite(context))
    }
}

/// Row-major nested-array view of a matrix, for serialization.
pub(crate) fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parse a row-major nested array back into a matrix. An empty outer list
/// yields a 0 x 0 matrix; inner rows must all have equal length.
pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], context: &'static str) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(crate::ReachError::dim(context, "rectangular rows", "ragged rows"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
