//! Feedback gains, the closed-loop law, the costate and the optimal cost.
//!
//! Indexing: the decision `u(t)` is taken at time `t ∈ 0..=N-d` with mode
//! `θ(t)` known, and enters the dynamics at `t + d`:
//!
//! ```text
//!   time      t-d  ...  t-1   t    t+1  ...  t+d
//!   applied  u(t-2d) .. u(t-d-1) u(t-d) u(t-d+1) .. u(t)
//!                                 ^ known, used to predict x(t+1)
//!   u(t) = -Kx(t,θ(t)) x(t+1) - Σ_{j=1}^{d-1} Ku^j(t,θ(t)) u(t-d+j)
//! ```
//!
//! Pre-horizon inputs `u(-d..-1)` come from [`InitialData`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{enumerate_paths, InitialData, JumpLinearModel};
use crate::policy::{propagate, Policy};
use crate::riccati::{backward_expectation, solve_riccati, RiccatiTables};

/// Per decision time and mode: `Kx = W⁻¹T⁰` and `Ku^j = W⁻¹T^j`.
#[derive(Clone, Debug, Serialize)]
pub struct GainSchedule {
    pub delay: usize,
    /// `kx[t][l]`, m×n.
    pub kx: Vec<Vec<Mat>>,
    /// `ku[j-1][t][l]`, m×m, `j = 1..d`.
    pub ku: Vec<Vec<Vec<Mat>>>,
}

impl GainSchedule {
    pub fn decision_times(&self) -> usize {
        self.kx.len()
    }

    pub fn ku(&self, j: usize, t: usize, mode: usize) -> &Mat {
        &self.ku[j - 1][t][mode]
    }
}

pub fn gains(tables: &RiccatiTables) -> Result<GainSchedule> {
    tables.require_solvable()?;
    let d = tables.delay();
    let times = tables.last_decision() + 1;
    let modes = tables.modes();
    let mut kx = Vec::with_capacity(times);
    let mut ku = vec![Vec::with_capacity(times); d - 1];
    for t in 0..times {
        let mut row = Vec::with_capacity(modes);
        for l in 0..modes {
            row.push(tables.w_solve(t, l, tables.t(0, t, l))?);
        }
        kx.push(row);
        for (j, slot) in ku.iter_mut().enumerate() {
            let row = (0..modes)
                .map(|l| tables.w_solve(t, l, tables.t(j + 1, t, l)))
                .collect::<Result<Vec<_>>>()?;
            slot.push(row);
        }
    }
    Ok(GainSchedule { delay: d, kx, ku })
}

/// The optimal decision at time `t`. `history` holds `u(t-d) ..= u(t-1)`.
pub fn control(
    model: &JumpLinearModel,
    schedule: &GainSchedule,
    t: usize,
    mode: usize,
    x_t: &Vector,
    history: &[Vector],
) -> Result<Vector> {
    if t >= schedule.decision_times() {
        return Err(Error::InvalidArgument {
            arg: "t",
            reason: format!("decision times are 0..={}", schedule.decision_times() - 1),
        });
    }
    model.check_mode(mode)?;
    let d = model.delay;
    if history.len() != d {
        return Err(Error::InvalidArgument { arg: "history", reason: format!("expected {d} past decisions") });
    }
    let predicted = &model.a[mode] * x_t + &model.b[mode] * &history[0];
    let mut u = -(&schedule.kx[t][mode] * predicted);
    for j in 1..d {
        u -= schedule.ku(j, t, mode) * &history[j];
    }
    Ok(u)
}

/// The optimal law as a [`Policy`], with the tables it was derived from.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    pub model: JumpLinearModel,
    pub tables: RiccatiTables,
    pub schedule: GainSchedule,
}

impl ClosedLoop {
    pub fn solve(model: &JumpLinearModel) -> Result<Self> {
        let tables = solve_riccati(model);
        if let crate::riccati::Solvability::NotPositiveDefinite { time, mode } = tables.solvability {
            return Err(Error::WNotPositiveDefinite { time, mode });
        }
        let schedule = gains(&tables)?;
        Ok(Self { model: model.clone(), tables, schedule })
    }

    /// [`costate`] without recomputing the gain schedule.
    pub fn costate(&self, k: usize, init: &InitialData, prefix: &[usize]) -> Result<Vector> {
        check_costate_args(&self.model, k, prefix)?;
        costate_with(&self.model, &self.tables, self, k, init, prefix)
    }
}

impl Policy for ClosedLoop {
    fn name(&self) -> &str {
        "riccati"
    }

    fn decide(&self, t: usize, prefix: &[usize], x_t: &Vector, history: &[Vector]) -> Result<Vector> {
        control(&self.model, &self.schedule, t, prefix[t], x_t, history)
    }
}

/// `λ_{k-1}` from the tables, given the closed-loop states and decisions on `θ(0..k)`.
fn costate_from_rollout(
    model: &JumpLinearModel,
    tables: &RiccatiTables,
    k: usize,
    prefix: &[usize],
    states: &[Vector],
    decisions: &[Vector],
) -> Result<Vector> {
    let d = model.delay;
    let tau = k - 1;
    let now = prefix[tau];
    let x_k = &states[k];
    let mut lambda = (tables.p(tau, now) - tables.p0(tau, now)) * x_k;
    for s in 1..d {
        // Correction for the pending decision u(k-s-1).
        if k < s + 1 || k - s - 1 > model.last_decision() {
            continue;
        }
        let origin = k - s - 1;
        let g = d - s;
        let alpha_now = tables.alpha(g, tau, &prefix[k - s..k]);
        let expected = backward_expectation(model, prefix[origin], &states[origin], &decisions[origin..k], |seq| {
            tables.alpha(g, tau, &seq[1..=s]).clone()
        })?;
        let solved = tables.w_solve(origin, prefix[origin], &Mat::from_column_slice(model.m, 1, expected.as_slice()))?;
        lambda -= alpha_now.transpose() * solved.column(0);
    }
    Ok(lambda)
}

/// Costate `λ_{k-1}` along the closed loop for the chain prefix `θ(0..k)`,
/// `k ∈ 1..=N+1`.
///
/// Corrections referring to pre-horizon decisions are absent, so the identity
/// with the definitional costate only holds for `k ≥ d`; earlier costates are
/// obtained by the backward recursion `λ_{k-1} = E{Q x(k) + A'λ_k | G_{k-1}}`.
pub fn costate(
    model: &JumpLinearModel,
    tables: &RiccatiTables,
    k: usize,
    init: &InitialData,
    prefix: &[usize],
) -> Result<Vector> {
    check_costate_args(model, k, prefix)?;
    let sol = ClosedLoopRef { model, schedule: &gains(tables)? };
    costate_with(model, tables, &sol, k, init, prefix)
}

fn check_costate_args(model: &JumpLinearModel, k: usize, prefix: &[usize]) -> Result<()> {
    if k == 0 || k > model.horizon + 1 {
        return Err(Error::InvalidArgument { arg: "k", reason: format!("must lie in 1..={}", model.horizon + 1) });
    }
    if prefix.len() != k {
        return Err(Error::InvalidArgument { arg: "prefix", reason: format!("expected θ(0..{k}), {} modes", k) });
    }
    Ok(())
}

struct ClosedLoopRef<'a> {
    model: &'a JumpLinearModel,
    schedule: &'a GainSchedule,
}

impl Policy for ClosedLoopRef<'_> {
    fn name(&self) -> &str {
        "riccati"
    }

    fn decide(&self, t: usize, prefix: &[usize], x_t: &Vector, history: &[Vector]) -> Result<Vector> {
        control(self.model, self.schedule, t, prefix[t], x_t, history)
    }
}

fn costate_with(
    model: &JumpLinearModel,
    tables: &RiccatiTables,
    policy: &dyn Policy,
    k: usize,
    init: &InitialData,
    prefix: &[usize],
) -> Result<Vector> {
    let roll = propagate(model, policy, init, prefix)?;
    if k >= model.delay {
        return costate_from_rollout(model, tables, k, prefix, &roll.states, &roll.decisions);
    }
    // λ_{k-1} = Σ_{l} λ(θ(k)=l) [Q_l x(k) + A_l' λ_k]
    let now = prefix[k - 1];
    let x_k = &roll.states[k];
    let mut out = Vector::zeros(model.n);
    let mut next = prefix.to_vec();
    next.push(0);
    for l in 0..model.modes {
        let w = model.transition(now, l);
        if w == 0.0 {
            continue;
        }
        next[k] = l;
        let lam = costate_with(model, tables, policy, k + 1, init, &next)?;
        out += (&model.q[l] * x_k + model.a[l].transpose() * lam) * w;
    }
    Ok(out)
}

/// Exact optimal expected cost: initial-state terms up to `x(d)` plus
/// `x(d)'λ_{d-1}`, averaged over all `L^d` mode paths `θ(0..d)`.
pub fn optimal_cost(model: &JumpLinearModel, tables: &RiccatiTables, init: &InitialData) -> Result<f64> {
    let schedule = gains(tables)?;
    let policy = ClosedLoopRef { model, schedule: &schedule };
    let d = model.delay;
    let mut total = 0.0;
    for (l0, &p0) in model.pi0.iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        for path in enumerate_paths(model, l0, d - 1)? {
            let mut prefix = vec![l0];
            prefix.extend(&path.modes);
            let roll = propagate(model, &policy, init, &prefix)?;
            let mut cost = 0.0;
            for k in 0..d {
                let x = &roll.states[k];
                cost += x.dot(&(&model.q[prefix[k]] * x));
            }
            let lambda = costate_from_rollout(model, tables, d, &prefix, &roll.states, &roll.decisions)?;
            cost += roll.states[d].dot(&lambda);
            total += p0 * path.weight * cost;
        }
    }
    Ok(total)
}
