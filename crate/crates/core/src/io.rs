//! Versioned JSON documents for tables, gains, the oracle QP, policy trees and
//! trajectories. Modes are 1-based here. Matrices are row-major nested arrays;
//! doubles are written in shortest round-trip form, so parsing a dump gives
//! back bit-identical values.

use serde::{Deserialize, Serialize};

use crate::controller::GainSchedule;
use crate::linalg::{to_rows, Vector};
use crate::model::path_from_index;
use crate::oracle::{PolicyTree, QuadraticCost};
use crate::riccati::{RiccatiTables, Solvability};
use crate::simulate::Trajectory;
use crate::SCHEMA_VERSION;

pub type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingW {
    pub time: usize,
    pub mode: usize,
}

/// One stored matrix. `j` is the superscript of `T`, `delta` and `alpha`;
/// `modes` is the mode at `time` for per-mode quantities, or the mode path
/// ending at `time` for `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    pub time: usize,
    pub modes: Vec<usize>,
    pub value: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TablesDump {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub modes: usize,
    pub d: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub solvable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing: Option<FailingW>,
    pub entries: Vec<TableEntry>,
}

impl TablesDump {
    pub fn new(tables: &RiccatiTables) -> Self {
        let (n, m) = tables.dims();
        let (l, d, horizon) = (tables.modes(), tables.delay(), tables.horizon());
        let mut entries = Vec::new();
        let mut push = |quantity: &str, j: Option<usize>, time: usize, modes: Vec<usize>, value: Rows| {
            entries.push(TableEntry {
                quantity: quantity.to_string(),
                j,
                time,
                modes: modes.into_iter().map(|x| x + 1).collect(),
                value,
            })
        };
        for time in 0..=horizon {
            for mode in 0..l {
                push("W", None, time, vec![mode], to_rows(tables.w(time, mode)));
                for j in 0..d {
                    push("T", Some(j), time, vec![mode], to_rows(tables.t(j, time, mode)));
                }
                push("P", None, time, vec![mode], to_rows(tables.p(time, mode)));
                push("P0", None, time, vec![mode], to_rows(tables.p0(time, mode)));
                for j in 1..d {
                    push("delta", Some(j), time, vec![mode], to_rows(tables.delta(j, time, mode)));
                }
            }
            for g in 1..d {
                let len = d - g;
                for idx in 0..l.pow(len as u32) {
                    let path = path_from_index(idx, len, l);
                    push("alpha", Some(g), time, path.clone(), to_rows(tables.alpha(g, time, &path)));
                }
            }
        }
        let failing = match tables.solvability {
            Solvability::Solvable => None,
            Solvability::NotPositiveDefinite { time, mode } => Some(FailingW { time, mode: mode + 1 }),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            n,
            m,
            modes: l,
            d,
            horizon,
            solvable: tables.is_solvable(),
            failing,
            entries,
        }
    }

    pub fn find(&self, quantity: &str, j: Option<usize>, time: usize, modes: &[usize]) -> Option<&TableEntry> {
        self.entries.iter().find(|e| e.quantity == quantity && e.j == j && e.time == time && e.modes == modes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGain {
    pub mode: usize,
    #[serde(rename = "K_x")]
    pub kx: Rows,
    /// `K_u^1 ..= K_u^{d-1}`.
    #[serde(rename = "K_u")]
    pub ku: Vec<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGains {
    pub t: usize,
    pub modes: Vec<ModeGain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainsDump {
    pub schema_version: u32,
    pub d: usize,
    pub gains: Vec<TimeGains>,
}

impl GainsDump {
    pub fn new(schedule: &GainSchedule) -> Self {
        let d = schedule.delay;
        let gains = (0..schedule.decision_times())
            .map(|t| TimeGains {
                t,
                modes: (0..schedule.kx[t].len())
                    .map(|l| ModeGain {
                        mode: l + 1,
                        kx: to_rows(&schedule.kx[t][l]),
                        ku: (1..d).map(|j| to_rows(schedule.ku(j, t, l))).collect(),
                    })
                    .collect(),
            })
            .collect();
        Self { schema_version: SCHEMA_VERSION, d, gains }
    }
}

pub const VARIABLE_ORDER: &str = "decision time, then chain prefix θ(0..=t) in lexicographic order (earliest mode most significant), then input coordinate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpDump {
    pub schema_version: u32,
    pub variable_order: String,
    #[serde(rename = "L")]
    pub modes: usize,
    pub m: usize,
    pub decision_times: usize,
    #[serde(rename = "H")]
    pub h: Rows,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QpDump {
    pub fn new(qp: &QuadraticCost) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            variable_order: VARIABLE_ORDER.to_string(),
            modes: qp.layout.modes,
            m: qp.layout.m,
            decision_times: qp.layout.times,
            h: to_rows(&qp.h),
            b: qp.b.iter().copied().collect(),
            c: qp.c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDecision {
    pub t: usize,
    pub prefix: Vec<usize>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTreeDump {
    pub schema_version: u32,
    pub decisions: Vec<TreeDecision>,
}

impl PolicyTreeDump {
    pub fn new(tree: &PolicyTree) -> Self {
        let l = tree.layout.modes;
        let decisions = tree
            .decisions
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter().enumerate().map(move |(idx, u)| TreeDecision {
                    t,
                    prefix: path_from_index(idx, t + 1, l).into_iter().map(|x| x + 1).collect(),
                    u: u.iter().copied().collect(),
                })
            })
            .collect();
        Self { schema_version: SCHEMA_VERSION, decisions }
    }
}

/// One line of a trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub schema_version: u32,
    pub run: u64,
    pub seed: u64,
    /// `θ(0..=N+1)`.
    pub modes: Vec<usize>,
    /// `x(0..=N+1)`.
    pub states: Rows,
    /// `u(-d..=N-d)`.
    pub decisions: Rows,
    pub cost: f64,
}

impl TrajectoryRecord {
    pub fn new(tr: &Trajectory, seed: u64, run: u64) -> Self {
        let rows = |v: &[Vector]| v.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            run,
            seed,
            modes: tr.modes.iter().map(|x| x + 1).collect(),
            states: rows(&tr.states),
            decisions: rows(&tr.decisions),
            cost: tr.cost,
        }
    }
}
