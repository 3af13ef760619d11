//! Side-by-side comparison with the reference numbers for the two-mode example.
//!
//! Row alignment: the reference table row `k` equals our decision time
//! `t = k + 1`, and the reference law for `u(k)` is our gain at `t = k + 1` in
//! the mode listed below. Our `t = 0` has no reference row; the reference row
//! `k = 5` matches no decision time and is reported as ambiguous.

use serde::Serialize;

use crate::controller::{optimal_cost, ClosedLoop};
use crate::io::TablesDump;
use crate::linalg::from_rows;
use crate::model::{two_mode_example, Problem};
use crate::oracle::{build_qp, solve_qp};
use crate::simulate::{exact_expected_cost, monte_carlo_cost, run_trajectory};
use crate::{Error, Result, SCHEMA_VERSION};

/// Reference table rows `k = 0..=5`: W1, W2, T0_1, T0_2, T1_1, T1_2.
pub const REFERENCE_TABLE: [[f64; 8]; 6] = [
    [23.6031, 26.7636, 12.2690, 7.5948, 9.6518, 4.6516, 21.8683, 24.7279],
    [23.1641, 26.2088, 12.0539, 7.4614, 9.4635, 4.5596, 21.4732, 24.2257],
    [21.8477, 24.0482, 11.6367, 7.1986, 8.9148, 4.2748, 20.5775, 22.5743],
    [17.7981, 19.0574, 9.6188, 5.9405, 7.1852, 3.4079, 16.8338, 17.9382],
    [3.6400, 5.0800, 0.3659, 0.2187, 0.7673, 0.2769, 0.9770, 2.2790],
    [1.1000, 1.7000, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
];

/// Reference laws `u(k) = -[a b] x(k+1) - c u(k-1)` for `k = 0..=4`, with the
/// 1-based mode whose gains they are.
pub const REFERENCE_GAINS: [(usize, [f64; 3]); 5] = [
    (2, [0.3606, 0.1738, 0.9239]),
    (2, [0.3611, 0.1740, 0.9243]),
    (1, [0.5326, 0.3295, 0.9419]),
    (1, [0.5404, 0.3338, 0.9458]),
    (1, [0.1005, 0.0601, 0.2684]),
];

pub const REFERENCE_OPTIMAL_COST: f64 = 93.7285;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Match,
    Mismatch,
    Ambiguous,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub item: String,
    pub printed: f64,
    pub computed: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CostComparison {
    pub printed: f64,
    pub closed_form: f64,
    pub qp_minimum: f64,
    pub exact_expected: f64,
    pub monte_carlo_runs: usize,
    pub monte_carlo_seed: u64,
    pub monte_carlo_mean: f64,
    pub monte_carlo_std_error: f64,
    pub first_run_cost: f64,
    pub closed_form_matches_qp: bool,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceReport {
    pub schema_version: u32,
    pub alignment: &'static str,
    pub table: Vec<Row>,
    pub gains: Vec<Row>,
    pub optimal_cost: CostComparison,
    /// False only if a row not flagged ambiguous mismatches.
    pub passed: bool,
}

pub const ALIGNMENT: &str = "reference table row k = decision time t = k+1; reference u(k) law = gain at t = k+1 \
in the listed mode; row k=5 is not produced by the recursions at any decision time (its W values equal the \
one-step average of R) and is flagged AMBIGUOUS";

const TABLE_TOL: f64 = 1e-3;

fn status(printed: f64, computed: f64) -> Status {
    if (printed - computed).abs() <= TABLE_TOL {
        Status::Match
    } else {
        Status::Mismatch
    }
}

fn scalar(dump: &TablesDump, quantity: &str, j: Option<usize>, time: usize, mode: usize) -> Result<(f64, Vec<f64>)> {
    let entry = dump
        .find(quantity, j, time, &[mode])
        .ok_or_else(|| Error::InvalidArgument { arg: "tables", reason: format!("missing {quantity} at t={time}") })?;
    Ok((entry.value[0][0], entry.value[0].clone()))
}

/// Recomputes the reference table and gains from a serialized table dump, plus
/// the optimal cost four ways.
pub fn reproduce(runs: usize, seed: u64, budget: u128) -> Result<ReproduceReport> {
    let problem: Problem = two_mode_example();
    let md = &problem.model;
    let cl = ClosedLoop::solve(md)?;
    let text = serde_json::to_string(&TablesDump::new(&cl.tables))?;
    let dump: TablesDump = serde_json::from_str(&text)?;

    let mut table = Vec::new();
    for (k, row) in REFERENCE_TABLE.iter().enumerate() {
        let t = k + 1;
        let ambiguous = t > md.last_decision();
        let note = ambiguous.then(|| "terminal window: W is a placeholder and T is zero".to_string());
        let mut computed = Vec::with_capacity(8);
        for mode in 1..=2 {
            computed.push(scalar(&dump, "W", None, t, mode)?.0);
        }
        for mode in 1..=2 {
            computed.extend(scalar(&dump, "T", Some(0), t, mode)?.1);
        }
        for mode in 1..=2 {
            computed.push(scalar(&dump, "T", Some(1), t, mode)?.0);
        }
        let labels = ["W_1", "W_2", "T0_1[1]", "T0_1[2]", "T0_2[1]", "T0_2[2]", "T1_1", "T1_2"];
        for ((label, &printed), computed) in labels.iter().zip(row).zip(computed) {
            table.push(Row {
                item: format!("row k={k} {label} (t={t})"),
                printed,
                computed,
                status: if ambiguous { Status::Ambiguous } else { status(printed, computed) },
                note: note.clone(),
            });
        }
    }

    let mut gains = Vec::new();
    for (k, (mode, printed)) in REFERENCE_GAINS.iter().enumerate() {
        let t = k + 1;
        let w = from_rows(&dump.find("W", None, t, &[*mode]).expect("present").value).expect("rectangular");
        let t0 = from_rows(&dump.find("T", Some(0), t, &[*mode]).expect("present").value).expect("rectangular");
        let t1 = from_rows(&dump.find("T", Some(1), t, &[*mode]).expect("present").value).expect("rectangular");
        let w_inv = w.try_inverse().ok_or_else(|| Error::Singular(format!("W at t={t}")))?;
        let kx = &w_inv * t0;
        let ku = &w_inv * t1;
        let computed = [kx[(0, 0)], kx[(0, 1)], ku[(0, 0)]];
        for (label, (p, c)) in ["Kx[1]", "Kx[2]", "Ku"].iter().zip(printed.iter().zip(computed)) {
            gains.push(Row {
                item: format!("u({k}) {label} (t={t}, mode {mode})"),
                printed: *p,
                computed: c,
                status: status(*p, c),
                note: None,
            });
        }
    }

    let closed_form = optimal_cost(md, &cl.tables, &problem.init)?;
    let qp_minimum = solve_qp(&build_qp(md, &problem.init, budget)?)?.minimum;
    let exact_expected = exact_expected_cost(md, &cl, &problem.init, budget)?;
    let mc = monte_carlo_cost(md, &cl, &problem.init, runs, seed, None)?;
    let first_run_cost = run_trajectory(md, &cl, &problem.init, seed, 0)?.cost;
    let optimal_cost = CostComparison {
        printed: REFERENCE_OPTIMAL_COST,
        closed_form,
        qp_minimum,
        exact_expected,
        monte_carlo_runs: runs,
        monte_carlo_seed: seed,
        monte_carlo_mean: mc.mean,
        monte_carlo_std_error: mc.std_error,
        first_run_cost,
        closed_form_matches_qp: (closed_form - qp_minimum).abs() <= 1e-8 * qp_minimum.abs().max(1.0),
        status: if (closed_form - REFERENCE_OPTIMAL_COST).abs() <= TABLE_TOL {
            Status::Match
        } else {
            Status::Ambiguous
        },
    };
    let passed = table.iter().chain(&gains).all(|r| r.status != Status::Mismatch) && optimal_cost.closed_form_matches_qp;
    Ok(ReproduceReport { schema_version: SCHEMA_VERSION, alignment: ALIGNMENT, table, gains, optimal_cost, passed })
}
