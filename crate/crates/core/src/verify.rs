//! Every cross-check between the Riccati solution and the oracle, as one report.

use serde::Serialize;

use crate::controller::{optimal_cost, ClosedLoop};
use crate::model::{path_from_index, Problem};
use crate::oracle::{build_qp, definitional_costates_all, solve_qp, stationarity_residual, PolicyTree};
use crate::riccati::check_table_identities;
use crate::simulate::exact_expected_cost;
use crate::{Result, SCHEMA_VERSION};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub passed: bool,
    pub optimal_cost: f64,
    pub checks: Vec<Check>,
}

/// Runs the closed-loop solution against the exact QP, definitional costates,
/// stationarity and the α/T identities. All residuals are relative.
pub fn verify(problem: &Problem, budget: u128, tol: f64) -> Result<VerifyReport> {
    let md = &problem.model;
    let init = &problem.init;
    let cl = ClosedLoop::solve(md)?;
    let qp = build_qp(md, init, budget)?;
    let sol = solve_qp(&qp)?;

    let j = optimal_cost(md, &cl.tables, init)?;
    let exact = exact_expected_cost(md, &cl, init, budget)?;
    let scale = sol.minimum.abs().max(1.0);

    let tree = PolicyTree::from_policy(md, &cl, init)?;
    let (ours, theirs) = (tree.to_vector(), sol.tree.to_vector());
    let z_scale = theirs.amax().max(1.0);
    let decisions = qp.reachable().iter().map(|&i| (ours[i] - theirs[i]).abs()).fold(0.0, f64::max) / z_scale;

    let table = definitional_costates_all(md, &cl, init, budget)?;
    let mut costates = 0.0_f64;
    for k in 1..=md.horizon + 1 {
        for idx in 0..md.modes.pow(k as u32) {
            let prefix = path_from_index(idx, k, md.modes);
            if table.weight(&prefix) == 0.0 {
                continue;
            }
            let reference = table.get(&prefix);
            let ours = cl.costate(k, init, &prefix)?;
            costates = costates.max((&ours - reference).amax() / reference.amax().max(1.0));
        }
    }

    let values = [
        ("riccati_identities", check_table_identities(md, &cl.tables)),
        ("table_asymmetry", cl.tables.max_asymmetry),
        ("qp_solve_residual", sol.residual),
        ("decisions_vs_qp_argmin", decisions),
        ("optimal_cost_vs_qp_minimum", (j - sol.minimum).abs() / scale),
        ("exact_cost_vs_qp_minimum", (exact - sol.minimum).abs() / scale),
        ("stationarity", stationarity_residual(md, &cl, init, budget)?.relative()),
        ("costate_vs_definitional", costates),
    ];
    let checks: Vec<Check> =
        values.into_iter().map(|(name, value)| Check { name, value, tol, passed: value.is_finite() && value <= tol }).collect();
    Ok(VerifyReport { schema_version: SCHEMA_VERSION, passed: checks.iter().all(|c| c.passed), optimal_cost: j, checks })
}
