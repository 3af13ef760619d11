//! Delay-free coupled Riccati recursion, and a baseline that applies its gains
//! to a d-step prediction assuming the current mode persists.

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Mat, SpdFactor, Vector};
use crate::model::JumpLinearModel;
use crate::policy::Policy;

#[derive(Clone, Debug)]
pub struct DelayFreeSolution {
    /// `p[k][l]` for `k = 0..=N+1`.
    pub p: Vec<Vec<Mat>>,
    /// `gains[k][l]` for `k = 0..=N`, with `u(k) = -K x(k)`.
    pub gains: Vec<Vec<Mat>>,
}

/// `Υ = B'E(P)B + R`, `M = B'E(P)A`, `P(k) = Q + A'E(P)A - M'Υ⁻¹M`,
/// with `E(P)_l = Σ_j p_lj P(k+1)_j`.
pub fn standard_coupled_riccati(model: &JumpLinearModel) -> Result<DelayFreeSolution> {
    let horizon = model.horizon;
    let mut p = vec![Vec::new(); horizon + 2];
    p[horizon + 1] = model.p_term.clone();
    let mut gains = vec![Vec::new(); horizon + 1];
    for k in (0..=horizon).rev() {
        let mut row_p = Vec::with_capacity(model.modes);
        let mut row_k = Vec::with_capacity(model.modes);
        for l in 0..model.modes {
            let mut ep = Mat::zeros(model.n, model.n);
            for (j, pj) in p[k + 1].iter().enumerate() {
                ep += pj * model.transition(l, j);
            }
            let (a, b) = (&model.a[l], &model.b[l]);
            let upsilon = symmetrize(&(b.transpose() * &ep * b + &model.r[l]));
            let factor = SpdFactor::new(&upsilon).ok_or_else(|| Error::Singular(format!("Υ at k={k}, mode {}", l + 1)))?;
            let cross = b.transpose() * &ep * a;
            let gain = factor.solve(&cross);
            row_p.push(symmetrize(&(&model.q[l] + a.transpose() * &ep * a - cross.transpose() * &gain)));
            row_k.push(gain);
        }
        p[k] = row_p;
        gains[k] = row_k;
    }
    Ok(DelayFreeSolution { p, gains })
}

/// Predicts `x(t+d)` with `A_{θ(t)}, B_{θ(t)}` held fixed, then applies the
/// delay-free gain for time `t+d` and mode `θ(t)`.
#[derive(Clone, Debug)]
pub struct FrozenModePredictor {
    model: JumpLinearModel,
    solution: DelayFreeSolution,
}

impl FrozenModePredictor {
    pub fn new(model: &JumpLinearModel) -> Result<Self> {
        Ok(Self { model: model.clone(), solution: standard_coupled_riccati(model)? })
    }
}

impl Policy for FrozenModePredictor {
    fn name(&self) -> &str {
        "frozen-mode"
    }

    fn decide(&self, t: usize, prefix: &[usize], x_t: &Vector, history: &[Vector]) -> Result<Vector> {
        let md = &self.model;
        let mode = prefix[t];
        let mut x = x_t.clone();
        for u in history {
            x = &md.a[mode] * x + &md.b[mode] * u;
        }
        Ok(-(&self.solution.gains[t + md.delay][mode] * x))
    }
}
