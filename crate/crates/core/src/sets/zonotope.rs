//! Zonotopes: centrally symmetric convex sets `{c + G b : ||b||_inf <= 1}`.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_finite_matrix, check_finite_vector, matrix_to_rows, rows_to_matrix};
use crate::{Matrix, ReachError, Result, Vector};

/// A zonotope `<center, generators>` in R^n with generators as the columns
/// of an `n x gamma` matrix. `gamma = 0` encodes the singleton `{center}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: Vector,
    generators: Matrix,
}

impl Zonotope {
    /// Build a zonotope, validating shapes and finiteness. All-zero
    /// generator columns are dropped: they do not change the set.
    pub fn new(center: Vector, generators: Matrix) -> Result<Self> {
        if generators.ncols() > 0 && generators.nrows() != center.len() {
            return Err(ReachError::dim(
                "Zonotope::new",
                format!("{} generator rows", center.len()),
                format!("{}", generators.nrows()),
            ));
        }
        check_finite_vector(&center, "Zonotope center")?;
        check_finite_matrix(&generators, "Zonotope generators")?;
        let kept: Vec<usize> = (0..generators.ncols())
            .filter(|&j| generators.column(j).iter().any(|&v| v != 0.0))
            .collect();
        let n = center.len();
        let generators = if kept.len() == generators.ncols() && generators.nrows() == n {
            generators
        } else {
            Matrix::from_fn(n, kept.len(), |i, j| generators[(i, kept[j])])
        };
        Ok(Zonotope { center, generators })
    }

    /// The singleton set `{center}`.
    pub fn singleton(center: Vector) -> Self {
        let n = center.len();
        Zonotope {
            center,
            generators: Matrix::zeros(n, 0),
        }
    }

    /// The axis-aligned box `[lower, upper]` as a zonotope with one diagonal
    /// generator per axis of positive width.
    pub fn from_interval(lower: &Vector, upper: &Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(ReachError::dim(
                "Zonotope::from_interval",
                lower.len(),
                upper.len(),
            ));
        }
        for i in 0..lower.len() {
            if lower[i] > upper[i] {
                return Err(ReachError::InvalidInterval { row: i, col: 0 });
            }
        }
        let center = (lower + upper) / 2.0;
        let half = (upper - lower) / 2.0;
        let gens = Matrix::from_fn(lower.len(), lower.len(), |i, j| {
            if i == j {
                half[i]
            } else {
                0.0
            }
        });
        Zonotope::new(center, gens)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn is_singleton(&self) -> bool {
        self.generators.ncols() == 0
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    /// Image under a linear map: `M <c, G> = <M c, M G>`.
    pub fn linear_map(&self, m: &Matrix) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(ReachError::dim(
                "Zonotope::linear_map",
                format!("matrix with {} columns", self.dim()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Zonotope::new(m * &self.center, m * &self.generators)
    }

    /// Minkowski sum: centers add, generators concatenate.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(ReachError::dim(
                "Zonotope::minkowski_sum",
                self.dim(),
                other.dim(),
            ));
        }
        let mut gens = Matrix::zeros(self.dim(), self.num_generators() + other.num_generators());
        gens.columns_mut(0, self.num_generators())
            .copy_from(&self.generators);
        gens.columns_mut(self.num_generators(), other.num_generators())
            .copy_from(&other.generators);
        Zonotope::new(&self.center + &other.center, gens)
    }

    /// Cartesian product: stacked centers, block-diagonal generators.
    pub fn cartesian_product(&self, other: &Self) -> Self {
        let n1 = self.dim();
        let n2 = other.dim();
        let g1 = self.num_generators();
        let g2 = other.num_generators();
        let mut center = Vector::zeros(n1 + n2);
        center.rows_mut(0, n1).copy_from(&self.center);
        center.rows_mut(n1, n2).copy_from(&other.center);
        let mut gens = Matrix::zeros(n1 + n2, g1 + g2);
        gens.view_mut((0, 0), (n1, g1)).copy_from(&self.generators);
        gens.view_mut((n1, g1), (n2, g2)).copy_from(&other.generators);
        Zonotope { center, generators: gens }
    }

    /// Translate the set by `offset`.
    pub fn translate(&self, offset: &Vector) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(ReachError::dim("Zonotope::translate", self.dim(), offset.len()));
        }
        Ok(Zonotope {
            center: &self.center + offset,
            generators: self.generators.clone(),
        })
    }

    /// Scale the set about its center by `factor >= 0`.
    pub fn scale(&self, factor: f64) -> Self {
        Zonotope {
            center: self.center.clone(),
            generators: &self.generators * factor,
        }
    }

    /// Exact support function `h(d) = d'c + sum_j |d'g_j|`.
    pub fn support_value(&self, direction: &Vector) -> Result<f64> {
        if direction.len() != self.dim() {
            return Err(ReachError::dim(
                "Zonotope::support_value",
                self.dim(),
                direction.len(),
            ));
        }
        if direction.norm() == 0.0 {
            return Err(ReachError::InvalidArgument(
                "support direction must be non-zero".into(),
            ));
        }
        let mut h = direction.dot(&self.center);
        for j in 0..self.num_generators() {
            h += direction.dot(&self.generators.column(j)).abs();
        }
        Ok(h)
    }

    /// Tight per-axis bounds: `c_i -/+ sum_j |G_ij|`.
    pub fn interval_hull(&self) -> (Vector, Vector) {
        let radius = Vector::from_fn(self.dim(), |i, _| self.generators.row(i).abs().sum());
        (&self.center - &radius, &self.center + &radius)
    }

    /// Certified point membership: true iff some `beta` with
    /// `||beta||_inf <= 1 + tol` satisfies `c + G beta = x` (up to
    /// floating-point residual). Decided by least squares with an exact
    /// linear-program fallback.
    pub fn contains_point(&self, x: &Vector, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(ReachError::dim("Zonotope::contains_point", self.dim(), x.len()));
        }
        if tol < 0.0 {
            return Err(ReachError::InvalidArgument("tolerance must be >= 0".into()));
        }
        let r = x - &self.center;
        Ok(super::certify_member(&self.generators, &r, tol))
    }

    /// Over-approximate with at most `ceil(max_order * dim)` generators by
    /// boxing the smallest generators (smallest `||g||_1 - ||g||_inf`
    /// first). Returns the set unchanged when no reduction is needed.
    pub fn reduce_order(&self, max_order: f64) -> Self {
        assert!(max_order >= 1.0, "max_order must be >= 1");
        let n = self.dim();
        let target = (max_order * n as f64).ceil() as usize;
        let g = self.num_generators();
        if g <= target || n == 0 {
            return self.clone();
        }
        let keep = target - n;
        let mut order: Vec<usize> = (0..g).collect();
        let crit: Vec<f64> = (0..g)
            .map(|j| {
                let col = self.generators.column(j);
                col.abs().sum() - col.amax()
            })
            .collect();
        order.sort_by(|&a, &b| {
            crit[b]
                .partial_cmp(&crit[a])
                .expect("finite criterion")
                .then(a.cmp(&b))
        });
        let mut gens = Matrix::zeros(n, keep + n);
        for (slot, &j) in order[..keep].iter().enumerate() {
            gens.set_column(slot, &self.generators.column(j));
        }
        for &j in &order[keep..] {
            for i in 0..n {
                gens[(i, keep + i)] += self.generators[(i, j)].abs();
            }
        }
        Zonotope::new(self.center.clone(), gens).expect("reduction preserves validity")
    }

    /// Vertices of the 2-D projection onto the axis pair `dims`, in
    /// counterclockwise order (the standard zonogon boundary walk).
    pub fn project(&self, dims: (usize, usize)) -> Result<Vec<[f64; 2]>> {
        let (d0, d1) = dims;
        if d0 >= self.dim() || d1 >= self.dim() || d0 == d1 {
            return Err(ReachError::InvalidArgument(format!(
                "projection dims ({d0}, {d1}) invalid for dimension {}",
                self.dim()
            )));
        }
        let c = [self.center[d0], self.center[d1]];
        // Normalize projected generators into the upper half-plane and
        // merge parallel ones; every distinct direction contributes one
        // edge to each of the two symmetric boundary chains.
        let mut gens: Vec<[f64; 2]> = Vec::new();
        for j in 0..self.num_generators() {
            let mut gx = self.generators[(d0, j)];
            let mut gy = self.generators[(d1, j)];
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            if gy < 0.0 || (gy == 0.0 && gx < 0.0) {
                gx = -gx;
                gy = -gy;
            }
            gens.push([gx, gy]);
        }
        if gens.is_empty() {
            return Ok(vec![c]);
        }
        gens.sort_by(|a, b| {
            f64::atan2(a[1], a[0])
                .partial_cmp(&f64::atan2(b[1], b[0]))
                .expect("finite angles")
        });
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(gens.len());
        for g in gens {
            if let Some(last) = merged.last_mut() {
                let cross = last[0] * g[1] - last[1] * g[0];
                let scale = (last[0].abs() + last[1].abs()) * (g[0].abs() + g[1].abs());
                if cross.abs() <= 1e-13 * scale {
                    last[0] += g[0];
                    last[1] += g[1];
                    continue;
                }
            }
            merged.push(g);
        }
        let sum = merged
            .iter()
            .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        // Walk from the all-minus vertex along increasing angle, then
        // mirror through the center for the opposite chain.
        let mut chain = Vec::with_capacity(merged.len() + 1);
        let mut p = [c[0] - sum[0], c[1] - sum[1]];
        chain.push(p);
        for g in &merged {
            p = [p[0] + 2.0 * g[0], p[1] + 2.0 * g[1]];
            chain.push(p);
        }
        let mut poly = chain.clone();
        for v in chain[1..chain.len() - 1].iter() {
            poly.push([2.0 * c[0] - v[0], 2.0 * c[1] - v[1]]);
        }
        Ok(poly)
    }

    /// Draw a uniform coefficient vector in `[-1, 1]^gamma` and return the
    /// corresponding member point. Uniform over coefficients, not over the
    /// set's volume.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let beta = Vector::from_fn(self.num_generators(), |_, _| rng.random_range(-1.0..=1.0));
        &self.center + &self.generators * beta
    }
}

#[derive(Serialize, Deserialize)]
struct ZonotopeRepr {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

impl Serialize for Zonotope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let generators = if self.num_generators() == 0 {
            Vec::new()
        } else {
            matrix_to_rows(&self.generators)
        };
        ZonotopeRepr {
            center: self.center.iter().copied().collect(),
            generators,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Zonotope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ZonotopeRepr::deserialize(deserializer)?;
        let center = Vector::from_vec(repr.center);
        let gens = if repr.generators.is_empty() {
            Matrix::zeros(center.len(), 0)
        } else {
            if repr.generators.len() != center.len() {
                return Err(D::Error::custom(format!(
                    "generator rows {} do not match center dimension {}",
                    repr.generators.len(),
                    center.len()
                )));
            }
            rows_to_matrix(&repr.generators, "Zonotope generators")
                .map_err(D::Error::custom)?
        };
        Zonotope::new(center, gens).map_err(D::Error::custom)
    }
}
