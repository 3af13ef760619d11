//! Problem data: the jump linear model, initial data, chain paths and F-products.
//!
//! Modes are 0-based inside the library. Every external format (model files,
//! dumps, CLI output) uses 1-based modes; conversion happens at that boundary.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, max_abs, symmetrize, to_rows, Mat, Vector};

/// Tolerance on row sums of the transition matrix and on `pi0`.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Absolute symmetry tolerance for weight matrices before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// PSD slack, relative to the largest eigenvalue magnitude.
pub const PSD_REL_TOL: f64 = 1e-10;

/// On-disk problem description. Matrices are row-major nested arrays.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub modes: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P_term")]
    pub p_term: Vec<Vec<Vec<f64>>>,
    pub trans: Vec<Vec<f64>>,
    pub pi0: Vec<f64>,
    pub d: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub u_pre: Vec<Vec<f64>>,
}

/// Diagnostic outcome of [`validate_model`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.issues.push(msg.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "pass")
        } else {
            write!(f, "{}", self.issues.join("; "))
        }
    }
}

/// Mode-switching linear dynamics `x(k+1) = A x(k) + B u(k-d)` with quadratic weights.
#[derive(Clone, Debug)]
pub struct JumpLinearModel {
    pub n: usize,
    pub m: usize,
    pub modes: usize,
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub q: Vec<Mat>,
    pub r: Vec<Mat>,
    pub p_term: Vec<Mat>,
    /// Row-stochastic, `trans[(i, j)] = P(θ(k+1) = j | θ(k) = i)`.
    pub trans: Mat,
    pub pi0: Vec<f64>,
    pub delay: usize,
    pub horizon: usize,
}

/// Known `x(0)` and the pre-horizon inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub x0: Vector,
    /// `u_pre[i]` is `u(i - d)`, so `u_pre[d-1]` is `u(-1)`.
    pub u_pre: Vec<Vector>,
}

impl InitialData {
    pub fn zero(model: &JumpLinearModel) -> Self {
        Self {
            x0: Vector::zeros(model.n),
            u_pre: vec![Vector::zeros(model.m); model.delay],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.x0.iter().all(|v| *v == 0.0) && self.u_pre.iter().all(|u| u.iter().all(|v| *v == 0.0))
    }
}

/// A validated model together with its initial data.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: JumpLinearModel,
    pub init: InitialData,
}

/// A chain continuation from `start_mode`, with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct ModePath {
    pub start_mode: usize,
    pub modes: Vec<usize>,
    pub weight: f64,
}

impl ModePath {
    /// Mode reached at the end of the path (the start mode for an empty path).
    pub fn last(&self) -> usize {
        self.modes.last().copied().unwrap_or(self.start_mode)
    }
}

fn check_matrices(
    report: &mut ValidationReport,
    name: &str,
    mats: &[Vec<Vec<f64>>],
    count: usize,
    shape: (usize, usize),
) -> Option<Vec<Mat>> {
    if mats.len() != count {
        report.push(format!("{name}: expected {count} matrices, got {}", mats.len()));
        return None;
    }
    let mut out = Vec::with_capacity(count);
    for (l, rows) in mats.iter().enumerate() {
        let Some(mat) = from_rows(rows) else {
            report.push(format!("{name}[{}]: ragged rows", l + 1));
            return None;
        };
        if (mat.nrows(), mat.ncols()) != shape {
            report.push(format!(
                "{name}[{}]: expected {}x{}, got {}x{}",
                l + 1,
                shape.0,
                shape.1,
                mat.nrows(),
                mat.ncols()
            ));
            return None;
        }
        if mat.iter().any(|v| !v.is_finite()) {
            report.push(format!("{name}[{}]: non-finite entry", l + 1));
            return None;
        }
        out.push(mat);
    }
    Some(out)
}

fn check_weight(report: &mut ValidationReport, name: &str, mats: &[Mat]) {
    for (l, w) in mats.iter().enumerate() {
        if max_abs(&(w - w.transpose())) >= SYMMETRY_TOL {
            report.push(format!("{name}[{}]: not symmetric", l + 1));
            continue;
        }
        let eig = symmetrize(w).symmetric_eigenvalues();
        let norm = eig.amax();
        let min = eig.min();
        if min < -PSD_REL_TOL * norm {
            report.push(format!(
                "{name}[{}]: not positive semidefinite (min eigenvalue {min:e})",
                l + 1
            ));
        }
    }
}

fn check_distribution(report: &mut ValidationReport, name: &str, probs: &[f64]) {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        report.push(format!("{name}: entries must lie in [0, 1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        report.push(format!("{name}: row not stochastic (sums to {sum})"));
    }
}

/// Checks every structural and numerical assumption on a problem file.
/// Never fails; violations are collected in the report.
pub fn validate_model(file: &ProblemFile) -> ValidationReport {
    build(file).err().unwrap_or_default()
}

fn build(file: &ProblemFile) -> std::result::Result<Problem, ValidationReport> {
    let mut report = ValidationReport::default();
    let (n, m, modes) = (file.n, file.m, file.modes);
    if n == 0 {
        report.push("n: state dimension must be positive");
    }
    if m == 0 {
        report.push("m: input dimension must be positive");
    }
    if modes == 0 {
        report.push("L: number of modes must be positive");
    }
    if file.d < 1 {
        report.push("d: delay must be ≥ 1");
    }
    if file.horizon <= file.d {
        report.push(format!("N: horizon must exceed the delay (N = {}, d = {})", file.horizon, file.d));
    }
    if !report.passed() {
        return Err(report);
    }

    let a = check_matrices(&mut report, "A", &file.a, modes, (n, n));
    let b = check_matrices(&mut report, "B", &file.b, modes, (n, m));
    let q = check_matrices(&mut report, "Q", &file.q, modes, (n, n));
    let r = check_matrices(&mut report, "R", &file.r, modes, (m, m));
    let p_term = check_matrices(&mut report, "P_term", &file.p_term, modes, (n, n));
    for (name, w) in [("Q", &q), ("R", &r), ("P_term", &p_term)] {
        if let Some(w) = w {
            check_weight(&mut report, name, w);
        }
    }

    let trans = match from_rows(&file.trans) {
        Some(t) if t.nrows() == modes && t.ncols() == modes => {
            for (i, row) in file.trans.iter().enumerate() {
                check_distribution(&mut report, &format!("trans row {}", i + 1), row);
            }
            Some(t)
        }
        _ => {
            report.push(format!("trans: expected {modes}x{modes}"));
            None
        }
    };
    if file.pi0.len() != modes {
        report.push(format!("pi0: expected {modes} entries, got {}", file.pi0.len()));
    } else {
        check_distribution(&mut report, "pi0", &file.pi0);
    }
    if file.x0.len() != n {
        report.push(format!("x0: expected {n} entries, got {}", file.x0.len()));
    }
    if file.u_pre.len() != file.d {
        report.push(format!(
            "u_pre: expected exactly d = {} pre-horizon inputs, got {}",
            file.d,
            file.u_pre.len()
        ));
    } else if file.u_pre.iter().any(|u| u.len() != m) {
        report.push(format!("u_pre: every input must have {m} entries"));
    }
    if file.x0.iter().chain(file.u_pre.iter().flatten()).any(|v| !v.is_finite()) {
        report.push("x0/u_pre: non-finite entry");
    }

    match (a, b, q, r, p_term, trans) {
        (Some(a), Some(b), Some(q), Some(r), Some(p_term), Some(trans)) if report.passed() => {
            let model = JumpLinearModel {
                n,
                m,
                modes,
                a,
                b,
                q: q.iter().map(symmetrize).collect(),
                r: r.iter().map(symmetrize).collect(),
                p_term: p_term.iter().map(symmetrize).collect(),
                trans,
                pi0: file.pi0.clone(),
                delay: file.d,
                horizon: file.horizon,
            };
            let init = InitialData {
                x0: Vector::from_vec(file.x0.clone()),
                u_pre: file.u_pre.iter().map(|u| Vector::from_vec(u.clone())).collect(),
            };
            Ok(Problem { model, init })
        }
        _ => Err(report),
    }
}

impl Problem {
    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        build(file).map_err(Error::InvalidModel)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> ProblemFile {
        let rows = |v: &[Mat]| v.iter().map(to_rows).collect::<Vec<_>>();
        let md = &self.model;
        ProblemFile {
            schema_version: Some(crate::SCHEMA_VERSION),
            n: md.n,
            m: md.m,
            modes: md.modes,
            a: rows(&md.a),
            b: rows(&md.b),
            q: rows(&md.q),
            r: rows(&md.r),
            p_term: rows(&md.p_term),
            trans: to_rows(&md.trans),
            pi0: md.pi0.clone(),
            d: md.delay,
            horizon: md.horizon,
            x0: self.init.x0.iter().cloned().collect(),
            u_pre: self.init.u_pre.iter().map(|u| u.iter().cloned().collect()).collect(),
        }
    }
}

/// The two-mode example system shipped with the crate.
pub const TWO_MODE_EXAMPLE_JSON: &str = include_str!("../examples/two_mode_example.json");

pub fn two_mode_example() -> Problem {
    Problem::from_json(TWO_MODE_EXAMPLE_JSON).expect("embedded example is valid")
}

impl JumpLinearModel {
    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.modes {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange { mode, modes: self.modes })
        }
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.trans[(from, to)]
    }

    /// Last decision time `N - d`.
    pub fn last_decision(&self) -> usize {
        self.horizon - self.delay
    }

    /// Number of full chain paths `θ(0..=N+1)`, saturating.
    pub fn full_path_count(&self) -> u128 {
        (self.modes as u128).saturating_pow(self.horizon as u32 + 2)
    }

    /// Probability of the chain sequence `θ(0..len)` starting from `pi0`.
    pub fn path_weight(&self, modes: &[usize]) -> f64 {
        let Some((&first, rest)) = modes.split_first() else { return 1.0 };
        let mut w = self.pi0[first];
        let mut prev = first;
        for &m in rest {
            w *= self.transition(prev, m);
            prev = m;
        }
        w
    }
}

/// All `L^steps` continuations of `start_mode`, lexicographic with the earliest
/// mode varying slowest. Cost is `O(L^steps)`; no memoization.
pub fn enumerate_paths(model: &JumpLinearModel, start_mode: usize, steps: usize) -> Result<Vec<ModePath>> {
    model.check_mode(start_mode)?;
    let modes = model.modes;
    let mut out = vec![ModePath { start_mode, modes: Vec::with_capacity(steps), weight: 1.0 }];
    for _ in 0..steps {
        let mut next = Vec::with_capacity(out.len() * modes);
        for path in &out {
            let from = path.last();
            for to in 0..modes {
                let mut p = path.clone();
                p.modes.push(to);
                p.weight *= model.transition(from, to);
                next.push(p);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Ordered product of A-matrices over `modes` (chronological), latest leftmost.
/// The empty sequence gives the identity.
pub fn f_product(model: &JumpLinearModel, modes: &[usize]) -> Result<Mat> {
    let mut out = Mat::identity(model.n, model.n);
    for &mode in modes {
        model.check_mode(mode)?;
        out = &model.a[mode] * out;
    }
    Ok(out)
}

/// Base-`radix` index of a mode sequence, first entry most significant.
pub fn path_index(modes: &[usize], radix: usize) -> usize {
    modes.iter().fold(0, |acc, &m| acc * radix + m)
}

/// Inverse of [`path_index`] for a sequence of length `len`.
pub fn path_from_index(mut index: usize, len: usize, radix: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % radix;
        index /= radix;
    }
    out
}
