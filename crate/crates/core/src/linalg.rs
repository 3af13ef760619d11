//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative pivot threshold for the positive-definiteness test.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// Construction fails unless every pivot exceeds `PD_PIVOT_TOL * trace / dim`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(a: &Mat) -> Option<Self> {
        let dim = a.nrows();
        if dim == 0 || dim != a.ncols() {
            return None;
        }
        let trace = a.trace();
        if !(trace > 0.0) || !trace.is_finite() {
            return None;
        }
        let threshold = PD_PIVOT_TOL * trace / dim as f64;
        let chol = Cholesky::new(a.clone())?;
        let l = chol.l_dirty();
        let min_pivot = (0..dim)
            .map(|i| l[(i, i)] * l[(i, i)])
            .fold(f64::INFINITY, f64::min);
        (min_pivot > threshold).then_some(Self { chol })
    }

    pub fn solve(&self, b: &Mat) -> Mat {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> Mat {
        self.chol.inverse()
    }
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max|a - a'|`, relative to `max(1e-300, max|a|)`.
pub fn asymmetry(a: &Mat) -> f64 {
    let scale = max_abs(a).max(1e-300);
    max_abs(&(a - a.transpose())) / scale
}

/// Max-abs difference relative to `max(floor, |a|, |b|)`.
pub fn rel_diff(a: &Mat, b: &Mat, floor: f64) -> f64 {
    let scale = max_abs(a).max(max_abs(b)).max(floor);
    max_abs(&(a - b)) / scale
}

pub fn rel_diff_vec(a: &Vector, b: &Vector, floor: f64) -> f64 {
    let scale = a.amax().max(b.amax()).max(floor);
    (a - b).amax() / scale
}

pub fn rel_diff_scalar(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Row-major nested arrays to a matrix; `None` on ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(a: &Mat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    symmetrize(a)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
