//! Interval matrices: elementwise boxes `[lower, upper]` of matrices.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_finite_matrix, matrix_to_rows, rows_to_matrix};
use crate::{Matrix, ReachError, Result, Vector};

/// Elementwise lower/upper matrix bounds of equal shape with
/// `lower <= upper` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lower: Matrix,
    upper: Matrix,
}

impl IntervalMatrix {
    pub fn new(lower: Matrix, upper: Matrix) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(ReachError::dim(
                "IntervalMatrix::new",
                format!("{}x{}", lower.nrows(), lower.ncols()),
                format!("{}x{}", upper.nrows(), upper.ncols()),
            ));
        }
        check_finite_matrix(&lower, "IntervalMatrix lower")?;
        check_finite_matrix(&upper, "IntervalMatrix upper")?;
        for i in 0..lower.nrows() {
            for j in 0..lower.ncols() {
                if lower[(i, j)] > upper[(i, j)] {
                    return Err(ReachError::InvalidInterval { row: i, col: j });
                }
            }
        }
        Ok(IntervalMatrix { lower, upper })
    }

    pub fn nrows(&self) -> usize {
        self.lower.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.lower.ncols()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn upper(&self) -> &Matrix {
        &self.upper
    }

    /// Elementwise containment within an absolute tolerance.
    pub fn contains(&self, m: &Matrix, tol: f64) -> bool {
        if m.shape() != self.lower.shape() {
            return false;
        }
        m.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol)
    }

    /// Collapse the columns: per row `i`, the smallest lower bound and the
    /// largest upper bound across all columns.
    pub fn rowwise_bounds(&self) -> (Vector, Vector) {
        let lo = Vector::from_fn(self.nrows(), |i, _| self.lower.row(i).min());
        let hi = Vector::from_fn(self.nrows(), |i, _| self.upper.row(i).max());
        (lo, hi)
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalMatrixRepr {
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl Serialize for IntervalMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        IntervalMatrixRepr {
            lower: matrix_to_rows(&self.lower),
            upper: matrix_to_rows(&self.upper),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntervalMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = IntervalMatrixRepr::deserialize(deserializer)?;
        let lower = rows_to_matrix(&repr.lower, "IntervalMatrix lower").map_err(D::Error::custom)?;
        let upper = rows_to_matrix(&repr.upper, "IntervalMatrix upper").map_err(D::Error::custom)?;
        IntervalMatrix::new(lower, upper).map_err(D::Error::custom)
    }
}
