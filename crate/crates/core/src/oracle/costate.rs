//! Costates by direct enumeration and the first-order optimality residual.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{enumerate_paths, path_from_index, path_index, InitialData, JumpLinearModel};
use crate::policy::{propagate, Policy};

use super::qp::check_budget;

/// `λ_i = E{Σ_{k=i+1}^{N} F(k,i+1)' Q x(k) + F(N+1,i+1)' P x(N+1) | θ(0..=i)}`
/// under `policy`, by enumerating every continuation of `prefix = θ(0..=i)`.
pub fn definitional_costate(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    prefix: &[usize],
    budget: u128,
) -> Result<Vector> {
    let n1 = model.horizon + 1;
    if prefix.is_empty() || prefix.len() > n1 {
        return Err(Error::InvalidArgument { arg: "prefix", reason: format!("length must lie in 1..={n1}") });
    }
    let i = prefix.len() - 1;
    let steps = n1 - i;
    let required = (model.modes as u128).checked_pow(steps as u32).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::PathBudgetExceeded { required, budget });
    }
    let mut out = Vector::zeros(model.n);
    for cont in enumerate_paths(model, prefix[i], steps)? {
        if cont.weight == 0.0 {
            continue;
        }
        let mut full = prefix.to_vec();
        full.extend(&cont.modes);
        out += backward_sum(model, policy, init, &full, i)? * cont.weight;
    }
    Ok(out)
}

/// The realized costate sum at `from` along one full path `θ(0..=N+1)`.
fn backward_sum(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    full: &[usize],
    from: usize,
) -> Result<Vector> {
    let roll = propagate(model, policy, init, full)?;
    Ok(backward_sums(model, full, &roll.states).swap_remove(from))
}

/// `v[i]` for `i = 0..=N` via `v_N = P x(N+1)`, `v_{i} = Q x(i+1) + A' v_{i+1}`.
fn backward_sums(model: &JumpLinearModel, full: &[usize], states: &[Vector]) -> Vec<Vector> {
    let n = model.horizon;
    let mut v = vec![Vector::zeros(model.n); n + 1];
    v[n] = &model.p_term[full[n + 1]] * &states[n + 1];
    for i in (0..n).rev() {
        let k = i + 1;
        v[i] = &model.q[full[k]] * &states[k] + model.a[full[k]].transpose() * &v[i + 1];
    }
    v
}

/// All definitional costates `λ_i(θ(0..=i))`, `i = 0..=N`, in one pass over full paths.
#[derive(Clone, Debug)]
pub struct CostateTable {
    modes: usize,
    /// `lambda[i][prefix index]`; zero for unreachable prefixes.
    pub lambda: Vec<Vec<Vector>>,
    /// Probability of each prefix.
    pub weight: Vec<Vec<f64>>,
}

impl CostateTable {
    pub fn get(&self, prefix: &[usize]) -> &Vector {
        &self.lambda[prefix.len() - 1][path_index(prefix, self.modes)]
    }

    pub fn weight(&self, prefix: &[usize]) -> f64 {
        self.weight[prefix.len() - 1][path_index(prefix, self.modes)]
    }
}

pub fn definitional_costates_all(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    budget: u128,
) -> Result<CostateTable> {
    check_budget(model, budget)?;
    let len = model.horizon + 2;
    let l = model.modes;
    let mut lambda: Vec<Vec<Vector>> = (0..len - 1).map(|i| vec![Vector::zeros(model.n); l.pow(i as u32 + 1)]).collect();
    let mut weight: Vec<Vec<f64>> = (0..len - 1).map(|i| vec![0.0; l.pow(i as u32 + 1)]).collect();
    for idx in 0..l.pow(len as u32) {
        let full = path_from_index(idx, len, l);
        let w = model.path_weight(&full);
        if w == 0.0 {
            continue;
        }
        let roll = propagate(model, policy, init, &full)?;
        let sums = backward_sums(model, &full, &roll.states);
        for (i, v) in sums.into_iter().enumerate() {
            let slot = path_index(&full[..=i], l);
            lambda[i][slot] += v * w;
            weight[i][slot] += w;
        }
    }
    for (row, wrow) in lambda.iter_mut().zip(&weight) {
        for (v, w) in row.iter_mut().zip(wrow) {
            if *w > 0.0 {
                *v /= *w;
            }
        }
    }
    Ok(CostateTable { modes: l, lambda, weight })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityReport {
    /// Largest `‖E{B'λ_k + R u(k-d) | G_{k-d}}‖` over decisions and reachable prefixes.
    pub max_abs: f64,
    /// Largest magnitude of either term, for relative comparisons.
    pub scale: f64,
}

impl StationarityReport {
    pub fn relative(&self) -> f64 {
        self.max_abs / self.scale.max(1.0)
    }
}

/// First-order optimality residual of `policy`, using definitional costates.
pub fn stationarity_residual(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    budget: u128,
) -> Result<StationarityReport> {
    let table = definitional_costates_all(model, policy, init, budget)?;
    let d = model.delay;
    let l = model.modes;
    let mut report = StationarityReport { max_abs: 0.0, scale: 0.0 };
    for t in 0..=model.last_decision() {
        for idx in 0..l.pow(t as u32 + 1) {
            let prefix = path_from_index(idx, t + 1, l);
            if table.weight(&prefix) == 0.0 {
                continue;
            }
            let roll = propagate(model, policy, init, &prefix)?;
            let u = &roll.decisions[t + d];
            let mut costate_part = Vector::zeros(model.m);
            let mut input_part = Vector::zeros(model.m);
            for cont in enumerate_paths(model, prefix[t], d)? {
                if cont.weight == 0.0 {
                    continue;
                }
                let mut full = prefix.clone();
                full.extend(&cont.modes);
                let now = cont.last();
                costate_part += model.b[now].transpose() * table.get(&full) * cont.weight;
                input_part += &model.r[now] * u * cont.weight;
            }
            report.max_abs = report.max_abs.max((&costate_part + &input_part).norm());
            report.scale = report.scale.max(costate_part.norm()).max(input_part.norm());
        }
    }
    Ok(report)
}
