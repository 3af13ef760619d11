//! Single-mode reference: time-varying LQR on the state augmented with the
//! pending inputs, `z(t) = [x(t); u(t-d); ...; u(t-1)]`.

use crate::controller::GainSchedule;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Mat, SpdFactor, Vector};
use crate::model::JumpLinearModel;
use crate::policy::Policy;

#[derive(Clone, Debug)]
pub struct AugmentedLqr {
    pub n: usize,
    pub m: usize,
    pub delay: usize,
    /// `gains[t]`, m×(n+dm), for `u(t) = -K z(t)`.
    pub gains: Vec<Mat>,
    /// Cost-to-go `z'Π(t)z` for `t = 0..=N+1`.
    pub value: Vec<Mat>,
}

impl AugmentedLqr {
    pub fn augmented_state(&self, x: &Vector, history: &[Vector]) -> Vector {
        let mut z = Vector::zeros(self.n + self.delay * self.m);
        z.rows_mut(0, self.n).copy_from(x);
        for (i, u) in history.iter().enumerate() {
            z.rows_mut(self.n + i * self.m, self.m).copy_from(u);
        }
        z
    }
}

pub fn augmented_lqr(model: &JumpLinearModel) -> Result<AugmentedLqr> {
    if model.modes != 1 {
        return Err(Error::InvalidArgument { arg: "model", reason: "augmented LQR needs a single mode".into() });
    }
    let (n, m, d) = (model.n, model.m, model.delay);
    let na = n + d * m;
    let (a, b) = (&model.a[0], &model.b[0]);

    let mut a_hat = Mat::zeros(na, na);
    a_hat.view_mut((0, 0), (n, n)).copy_from(a);
    a_hat.view_mut((0, n), (n, m)).copy_from(b);
    for i in 0..d - 1 {
        a_hat.view_mut((n + i * m, n + (i + 1) * m), (m, m)).fill_with_identity();
    }
    let mut b_hat = Mat::zeros(na, m);
    b_hat.view_mut((n + (d - 1) * m, 0), (m, m)).fill_with_identity();

    let stage = |t: usize| {
        let mut s = Mat::zeros(na, na);
        s.view_mut((0, 0), (n, n)).copy_from(&model.q[0]);
        if t >= d {
            s.view_mut((n, n), (m, m)).copy_from(&model.r[0]);
        }
        s
    };

    let horizon = model.horizon;
    let mut value = vec![Mat::zeros(na, na); horizon + 2];
    value[horizon + 1].view_mut((0, 0), (n, n)).copy_from(&model.p_term[0]);
    let mut gains = vec![Mat::zeros(m, na); model.last_decision() + 1];
    for t in (0..=horizon).rev() {
        let next = &value[t + 1];
        let mut pi = stage(t) + a_hat.transpose() * next * &a_hat;
        if t <= model.last_decision() {
            let hu = symmetrize(&(b_hat.transpose() * next * &b_hat));
            let factor = SpdFactor::new(&hu).ok_or_else(|| Error::Singular(format!("augmented input weight at t={t}")))?;
            let cross = b_hat.transpose() * next * &a_hat;
            let k = factor.solve(&cross);
            pi -= cross.transpose() * &k;
            gains[t] = k;
        }
        value[t] = symmetrize(&pi);
    }
    Ok(AugmentedLqr { n, m, delay: d, gains, value })
}

/// The delay-law gains rewritten as one gain on the augmented state:
/// `[Kx A, Kx B, Ku^1, ..., Ku^{d-1}]`.
pub fn equivalent_augmented_gain(model: &JumpLinearModel, schedule: &GainSchedule, t: usize, mode: usize) -> Mat {
    let (n, m, d) = (model.n, model.m, model.delay);
    let kx = &schedule.kx[t][mode];
    let mut out = Mat::zeros(m, n + d * m);
    out.view_mut((0, 0), (m, n)).copy_from(&(kx * &model.a[mode]));
    out.view_mut((0, n), (m, m)).copy_from(&(kx * &model.b[mode]));
    for j in 1..d {
        out.view_mut((0, n + j * m), (m, m)).copy_from(schedule.ku(j, t, mode));
    }
    out
}

impl Policy for AugmentedLqr {
    fn name(&self) -> &str {
        "augmented-lqr"
    }

    fn decide(&self, t: usize, _prefix: &[usize], x_t: &Vector, history: &[Vector]) -> Result<Vector> {
        let k = self.gains.get(t).ok_or(Error::InvalidArgument { arg: "t", reason: "beyond the last decision time".into() })?;
        Ok(-(k * self.augmented_state(x_t, history)))
    }
}
