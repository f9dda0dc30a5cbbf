//! Matrix zonotopes: sets of matrices `{C + sum_i b_i G_i : |b_i| <= 1}`.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_finite_matrix, matrix_to_rows, rows_to_matrix, IntervalMatrix, Sign, Zonotope};
use crate::{Matrix, ReachError, Result, Vector};

/// A matrix zonotope `<center, [G_1, ..., G_k]>` with every generator the
/// same shape as the center. No generators encodes a singleton matrix set.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixZonotope {
    center: Matrix,
    generators: Vec<Matrix>,
}

impl MatrixZonotope {
    /// Build a matrix zonotope, validating shapes and finiteness. All-zero
    /// generator matrices are dropped.
    pub fn new(center: Matrix, generators: Vec<Matrix>) -> Result<Self> {
        check_finite_matrix(&center, "MatrixZonotope center")?;
        for g in &generators {
            if g.shape() != center.shape() {
                return Err(ReachError::dim(
                    "MatrixZonotope::new",
                    format!("{}x{}", center.nrows(), center.ncols()),
                    format!("{}x{}", g.nrows(), g.ncols()),
                ));
            }
            check_finite_matrix(g, "MatrixZonotope generator")?;
        }
        let generators = generators
            .into_iter()
            .filter(|g| g.iter().any(|&v| v != 0.0))
            .collect();
        Ok(MatrixZonotope { center, generators })
    }

    /// The singleton set `{center}`.
    pub fn singleton(center: Matrix) -> Self {
        MatrixZonotope {
            center,
            generators: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.center.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.center.ncols()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn center(&self) -> &Matrix {
        &self.center
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    /// The affine set `X + M` or `X - M` for a constant matrix `X`. The
    /// generator signs flip under minus, which leaves the represented set's
    /// symmetry intact.
    pub fn affine(&self, x: &Matrix, sign: Sign) -> Result<MatrixZonotope> {
        if x.shape() != self.center.shape() {
            return Err(ReachError::dim(
                "MatrixZonotope::affine",
                format!("{}x{}", self.nrows(), self.ncols()),
                format!("{}x{}", x.nrows(), x.ncols()),
            ));
        }
        let (center, generators) = match sign {
            Sign::Plus => (
                x + &self.center,
                self.generators.clone(),
            ),
            Sign::Minus => (
                x - &self.center,
                self.generators.iter().map(|g| -g).collect(),
            ),
        };
        MatrixZonotope::new(center, generators)
    }

    /// Right-multiply by a constant matrix: `{M H : M in self}`. Exact, not
    /// an over-approximation, since the map is linear.
    pub fn mul_matrix(&self, h: &Matrix) -> Result<MatrixZonotope> {
        if h.nrows() != self.ncols() {
            return Err(ReachError::dim(
                "MatrixZonotope::mul_matrix",
                format!("{} rows", self.ncols()),
                format!("{}", h.nrows()),
            ));
        }
        MatrixZonotope::new(
            &self.center * h,
            self.generators.iter().map(|g| g * h).collect(),
        )
    }

    /// Sound over-approximation of the set-product `{M z : M in self, z in z}`
    /// as a zonotope. The result's generators are the cross terms
    /// `{C g_j} + {G_i c} + {G_i g_j}`, so every product of members is a
    /// member of the result; exactness is not claimed.
    pub fn mul_zonotope(&self, z: &Zonotope) -> Result<Zonotope> {
        if z.dim() != self.ncols() {
            return Err(ReachError::dim(
                "MatrixZonotope::mul_zonotope",
                format!("zonotope of dimension {}", self.ncols()),
                format!("{}", z.dim()),
            ));
        }
        let n = self.nrows();
        let gz = z.num_generators();
        let gm = self.num_generators();
        let center = &self.center * z.center();
        let total = gz + gm * (1 + gz);
        let mut gens = Matrix::zeros(n, total);
        let mut slot = 0;
        for j in 0..gz {
            gens.set_column(slot, &(&self.center * z.generators().column(j)));
            slot += 1;
        }
        for gi in &self.generators {
            gens.set_column(slot, &(gi * z.center()));
            slot += 1;
        }
        for gi in &self.generators {
            for j in 0..gz {
                gens.set_column(slot, &(gi * z.generators().column(j)));
                slot += 1;
            }
        }
        Zonotope::new(center, gens)
    }

    /// Elementwise enclosure `[C - sum_i |G_i|, C + sum_i |G_i|]`. Every
    /// member matrix lies within the bounds, and the bounds are attained
    /// entrywise by sign-pattern members.
    pub fn to_interval_matrix(&self) -> IntervalMatrix {
        let mut radius = Matrix::zeros(self.nrows(), self.ncols());
        for g in &self.generators {
            radius += g.abs();
        }
        IntervalMatrix::new(&self.center - &radius, &self.center + &radius)
            .expect("radius is non-negative")
    }

    /// Certified matrix membership via the vectorized coefficient problem,
    /// with the same least-squares-then-LP decision as point membership.
    pub fn contains_matrix(&self, m: &Matrix, tol: f64) -> Result<bool> {
        if m.shape() != self.center.shape() {
            return Err(ReachError::dim(
                "MatrixZonotope::contains_matrix",
                format!("{}x{}", self.nrows(), self.ncols()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if tol < 0.0 {
            return Err(ReachError::InvalidArgument("tolerance must be >= 0".into()));
        }
        let len = self.nrows() * self.ncols();
        let mut stacked = Matrix::zeros(len, self.num_generators());
        for (i, g) in self.generators.iter().enumerate() {
            stacked.set_column(i, &Vector::from_column_slice(g.as_slice()));
        }
        let diff = m - &self.center;
        let rhs = Vector::from_column_slice(diff.as_slice());
        Ok(super::certify_member(&stacked, &rhs, tol))
    }

    /// Draw a member by sampling each coefficient uniformly in `[-1, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let mut m = self.center.clone();
        for g in &self.generators {
            m += g * rng.random_range(-1.0..=1.0);
        }
        m
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixZonotopeRepr {
    center: Vec<Vec<f64>>,
    generators: Vec<Vec<Vec<f64>>>,
}

impl Serialize for MatrixZonotope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixZonotopeRepr {
            center: matrix_to_rows(&self.center),
            generators: self.generators.iter().map(matrix_to_rows).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatrixZonotope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixZonotopeRepr::deserialize(deserializer)?;
        let center = rows_to_matrix(&repr.center, "MatrixZonotope center").map_err(D::Error::custom)?;
        let generators = repr
            .generators
            .iter()
            .map(|g| rows_to_matrix(g, "MatrixZonotope generator"))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        MatrixZonotope::new(center, generators).map_err(D::Error::custom)
    }
}
