//! Conditional expectations over chain continuations.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{enumerate_paths, f_product, JumpLinearModel, ModePath};

/// `Σ_path weight · f(path)` over every `span`-step continuation of `start_mode`.
pub fn lambda_expectation<F>(model: &JumpLinearModel, start_mode: usize, span: usize, mut f: F) -> Result<Mat>
where
    F: FnMut(&ModePath) -> Mat,
{
    let mut acc: Option<Mat> = None;
    for path in enumerate_paths(model, start_mode, span)? {
        let term = f(&path) * path.weight;
        match acc.as_mut() {
            None => acc = Some(term),
            Some(sum) => {
                if sum.shape() != term.shape() {
                    return Err(Error::ShapeMismatch { expected: sum.shape(), got: term.shape() });
                }
                *sum += term;
            }
        }
    }
    Ok(acc.expect("at least one path"))
}

/// Expansion of `E{g · x(k) | G_{k-m}}` against the quantities known at `k - m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardCoefficients {
    /// Multiplies `x(k - m)`.
    pub state: Mat,
    /// `inputs[r]` multiplies `u(k - m + r - d)`, for `r = 0..m`.
    pub inputs: Vec<Mat>,
}

impl BackwardCoefficients {
    pub fn apply(&self, x_start: &Vector, inputs: &[Vector]) -> Vector {
        let mut out = &self.state * x_start;
        for (coef, u) in self.inputs.iter().zip(inputs) {
            out += coef * u;
        }
        out
    }
}

fn check_msteps(model: &JumpLinearModel, msteps: usize) -> Result<()> {
    if msteps == 0 {
        return Err(Error::InvalidArgument { arg: "msteps", reason: "must be at least 1".into() });
    }
    if msteps > model.delay {
        return Err(Error::NotMeasurable { msteps, delay: model.delay });
    }
    Ok(())
}

/// Multi-step backward formula: for a mode-dependent weight `g` (called with the
/// full mode sequence at times `k-m ..= k`), returns the path-weighted F-product
/// coefficients of `E{g · x(k) | G_{k-m}}`.
///
/// Only `m ≤ d` is accepted; beyond that the intervening inputs are not yet decided.
pub fn backward_coefficients<G>(
    model: &JumpLinearModel,
    start_mode: usize,
    msteps: usize,
    mut g: G,
) -> Result<BackwardCoefficients>
where
    G: FnMut(&[usize]) -> Mat,
{
    check_msteps(model, msteps)?;
    let mut state: Option<Mat> = None;
    let mut inputs: Vec<Mat> = Vec::new();
    let mut seq = Vec::with_capacity(msteps + 1);
    for path in enumerate_paths(model, start_mode, msteps)? {
        seq.clear();
        seq.push(start_mode);
        seq.extend_from_slice(&path.modes);
        let weighted = g(&seq) * path.weight;
        if weighted.ncols() != model.n {
            return Err(Error::ShapeMismatch { expected: (weighted.nrows(), model.n), got: weighted.shape() });
        }
        // seq[0..msteps] are the modes acting at k-m .. k-1.
        let s = &weighted * f_product(model, &seq[..msteps])?;
        let us: Vec<Mat> = (0..msteps)
            .map(|r| Ok(&weighted * f_product(model, &seq[r + 1..msteps])? * &model.b[seq[r]]))
            .collect::<Result<_>>()?;
        match state.as_mut() {
            None => {
                state = Some(s);
                inputs = us;
            }
            Some(acc) => {
                if acc.shape() != s.shape() {
                    return Err(Error::ShapeMismatch { expected: acc.shape(), got: s.shape() });
                }
                *acc += s;
                for (a, u) in inputs.iter_mut().zip(us) {
                    *a += u;
                }
            }
        }
    }
    Ok(BackwardCoefficients { state: state.expect("at least one path"), inputs })
}

/// Evaluates `E{g · x(k) | G_{k-m}}` given `x(k-m)` and the inputs
/// `u(i-d)` for `i = k-m .. k-1` (`inputs.len()` is `m`).
pub fn backward_expectation<G>(
    model: &JumpLinearModel,
    start_mode: usize,
    x_start: &Vector,
    inputs: &[Vector],
    g: G,
) -> Result<Vector>
where
    G: FnMut(&[usize]) -> Mat,
{
    let coef = backward_coefficients(model, start_mode, inputs.len(), g)?;
    Ok(coef.apply(x_start, inputs))
}
