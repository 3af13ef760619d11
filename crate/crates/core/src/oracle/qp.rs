//! Exact quadratic program over path-adapted policy trees.
//!
//! Variables are ordered by decision time, then lexicographic chain prefix
//! `θ(0..=t)` (earliest mode most significant), then input coordinate. The
//! objective is `J(z) = z'Hz + 2b'z + c`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Mat, SpdFactor, Vector};
use crate::model::{path_index, InitialData, JumpLinearModel};
use crate::policy::Policy;

/// Above this many variables the dense QP is refused.
pub const QP_MAX_VARS: usize = 4000;

/// Variable layout of a policy tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TreeLayout {
    pub modes: usize,
    pub m: usize,
    /// Number of decision times, `N - d + 1`.
    pub times: usize,
}

impl TreeLayout {
    pub fn new(model: &JumpLinearModel) -> Self {
        Self { modes: model.modes, m: model.m, times: model.last_decision() + 1 }
    }

    pub fn prefixes(&self, t: usize) -> usize {
        self.modes.pow(t as u32 + 1)
    }

    /// First variable of decision time `t`.
    pub fn offset(&self, t: usize) -> usize {
        (0..t).map(|s| self.prefixes(s)).sum::<usize>() * self.m
    }

    pub fn variable_count(&self) -> usize {
        self.offset(self.times)
    }

    /// First variable of the decision at `t` for prefix `θ(0..=t)`.
    pub fn block(&self, t: usize, prefix: &[usize]) -> usize {
        debug_assert_eq!(prefix.len(), t + 1);
        self.offset(t) + path_index(prefix, self.modes) * self.m
    }
}

/// One decision per chain prefix per decision time.
#[derive(Clone, Debug, Serialize)]
pub struct PolicyTree {
    pub layout: TreeLayout,
    /// `decisions[t][prefix index]`.
    pub decisions: Vec<Vec<Vector>>,
}

impl PolicyTree {
    pub fn zeros(layout: TreeLayout) -> Self {
        let decisions = (0..layout.times)
            .map(|t| vec![Vector::zeros(layout.m); layout.prefixes(t)])
            .collect();
        Self { layout, decisions }
    }

    pub fn from_vector(layout: TreeLayout, z: &Vector) -> Self {
        let mut tree = Self::zeros(layout);
        for (t, row) in tree.decisions.iter_mut().enumerate() {
            let base = layout.offset(t);
            for (idx, u) in row.iter_mut().enumerate() {
                let start = base + idx * layout.m;
                u.copy_from(&z.rows(start, layout.m));
            }
        }
        tree
    }

    pub fn to_vector(&self) -> Vector {
        let mut z = Vector::zeros(self.layout.variable_count());
        for (t, row) in self.decisions.iter().enumerate() {
            let base = self.layout.offset(t);
            for (idx, u) in row.iter().enumerate() {
                z.rows_mut(base + idx * self.layout.m, self.layout.m).copy_from(u);
            }
        }
        z
    }

    pub fn get(&self, t: usize, prefix: &[usize]) -> &Vector {
        &self.decisions[t][path_index(prefix, self.layout.modes)]
    }

    /// Tabulates any policy on every prefix.
    pub fn from_policy(model: &JumpLinearModel, policy: &dyn Policy, init: &InitialData) -> Result<Self> {
        let layout = TreeLayout::new(model);
        let mut tree = Self::zeros(layout);
        let last = layout.times - 1;
        let leaves = layout.prefixes(last);
        for idx in 0..leaves {
            let prefix = crate::model::path_from_index(idx, last + 1, model.modes);
            let roll = crate::policy::propagate(model, policy, init, &prefix)?;
            for t in 0..=last {
                let slot = path_index(&prefix[..=t], model.modes);
                tree.decisions[t][slot] = roll.decisions[t + model.delay].clone();
            }
        }
        Ok(tree)
    }
}

impl Policy for PolicyTree {
    fn name(&self) -> &str {
        "qp-tree"
    }

    fn decide(&self, t: usize, prefix: &[usize], _x_t: &Vector, _history: &[Vector]) -> Result<Vector> {
        if t >= self.layout.times {
            return Err(Error::InvalidArgument { arg: "t", reason: "beyond the last decision time".into() });
        }
        Ok(self.get(t, &prefix[..=t]).clone())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticCost {
    pub layout: TreeLayout,
    pub h: Mat,
    pub b: Vector,
    pub c: f64,
    /// Probability of the prefix owning each variable block, per variable.
    pub var_weight: Vec<f64>,
}

impl QuadraticCost {
    pub fn evaluate(&self, z: &Vector) -> f64 {
        z.dot(&(&self.h * z)) + 2.0 * self.b.dot(z) + self.c
    }
}

#[derive(Clone, Debug)]
struct Affine {
    c: Vector,
    terms: Vec<(usize, Mat)>,
}

struct Builder<'a> {
    model: &'a JumpLinearModel,
    init: &'a InitialData,
    layout: TreeLayout,
    h: Mat,
    b: Vector,
    c: f64,
    var_weight: Vec<f64>,
}

impl Builder<'_> {
    fn add_quadratic(&mut self, w: f64, x: &Affine, weight: &Mat) {
        let m = self.layout.m;
        let mc = weight * &x.c;
        self.c += w * x.c.dot(&mc);
        for (i, gi) in &x.terms {
            let gi_t_m = gi.transpose() * weight;
            let mut bb = self.b.rows_mut(*i, m);
            bb += &gi_t_m * &x.c * w;
            for (j, gj) in &x.terms {
                let mut hb = self.h.view_mut((*i, *j), (m, m));
                hb += &gi_t_m * gj * w;
            }
        }
    }

    fn visit(&mut self, k: usize, prefix: &mut Vec<usize>, prob: f64, x: Affine) {
        let md = self.model;
        let mode = prefix[k];
        let d = md.delay;
        self.add_quadratic(prob, &x, &md.q[mode]);
        if k <= md.last_decision() {
            let blk = self.layout.block(k, prefix);
            for v in &mut self.var_weight[blk..blk + self.layout.m] {
                *v = prob;
            }
        }

        let mut next = Affine { c: &md.a[mode] * &x.c, terms: x.terms.iter().map(|(i, g)| (*i, &md.a[mode] * g)).collect() };
        if k < d {
            next.c += &md.b[mode] * &self.init.u_pre[k];
        } else {
            let blk = self.layout.block(k - d, &prefix[..=k - d]);
            let m = self.layout.m;
            let mut hb = self.h.view_mut((blk, blk), (m, m));
            hb += &md.r[mode] * prob;
            next.terms.push((blk, md.b[mode].clone()));
        }

        if k == md.horizon {
            for l in 0..md.modes {
                let w = prob * md.transition(mode, l);
                if w > 0.0 {
                    self.add_quadratic(w, &next, &md.p_term[l]);
                }
            }
            return;
        }
        for l in 0..md.modes {
            let w = prob * md.transition(mode, l);
            if w > 0.0 {
                prefix.push(l);
                self.visit(k + 1, prefix, w, next.clone());
                prefix.pop();
            }
        }
    }
}

pub(crate) fn check_budget(model: &JumpLinearModel, budget: u128) -> Result<()> {
    let required = model.full_path_count();
    if required > budget {
        return Err(Error::PathBudgetExceeded { required, budget });
    }
    Ok(())
}

/// Expected cost as an exact quadratic in the policy-tree variables.
pub fn build_qp(model: &JumpLinearModel, init: &InitialData, budget: u128) -> Result<QuadraticCost> {
    check_budget(model, budget)?;
    let layout = TreeLayout::new(model);
    let vars = layout.variable_count();
    if vars > QP_MAX_VARS {
        return Err(Error::QpTooLarge { vars, limit: QP_MAX_VARS });
    }
    let mut builder = Builder {
        model,
        init,
        layout,
        h: Mat::zeros(vars, vars),
        b: Vector::zeros(vars),
        c: 0.0,
        var_weight: vec![0.0; vars],
    };
    for (l0, &p) in model.pi0.iter().enumerate() {
        if p > 0.0 {
            let x = Affine { c: init.x0.clone(), terms: Vec::new() };
            builder.visit(0, &mut vec![l0], p, x);
        }
    }
    let Builder { h, b, c, var_weight, .. } = builder;
    let h = crate::linalg::symmetrize(&h);
    Ok(QuadraticCost { layout, h, b, c, var_weight })
}

/// Jacobi-equilibrated Cholesky of a Hessian; `None` unless positive definite.
struct ScaledFactor {
    scale: Vector,
    factor: SpdFactor,
}

impl ScaledFactor {
    fn new(h: &Mat) -> Option<Self> {
        let diag = h.diagonal();
        if diag.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let scale = diag.map(|v| 1.0 / v.sqrt());
        let scaled = Mat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * scale[i] * scale[j]);
        SpdFactor::new(&scaled).map(|factor| Self { scale, factor })
    }

    fn solve(&self, rhs: &Vector) -> Vector {
        let y = self.factor.solve_vec(&rhs.component_mul(&self.scale));
        y.component_mul(&self.scale)
    }
}

impl QuadraticCost {
    /// Variables owned by prefixes of positive probability. The rest do not
    /// appear in the objective.
    pub fn reachable(&self) -> Vec<usize> {
        (0..self.var_weight.len()).filter(|&i| self.var_weight[i] > 0.0).collect()
    }
}

/// Positive definiteness of `H` restricted to reachable variables.
pub fn is_positive_definite(qp: &QuadraticCost) -> bool {
    let keep = qp.reachable();
    ScaledFactor::new(&qp.h.select_rows(&keep).select_columns(&keep)).is_some()
}

#[derive(Clone, Debug, Serialize)]
pub struct QpSolution {
    pub tree: PolicyTree,
    pub minimum: f64,
    /// `‖Hz + b‖ / ‖b‖` at the returned point.
    pub residual: f64,
}

/// Minimizer of the exact QP via a symmetric positive-definite solve over the
/// reachable variables; decisions for zero-probability prefixes are zero.
pub fn solve_qp(qp: &QuadraticCost) -> Result<QpSolution> {
    let keep = qp.reachable();
    let h = qp.h.select_rows(&keep).select_columns(&keep);
    let b = qp.b.select_rows(&keep);
    let factor = ScaledFactor::new(&h).ok_or(Error::HessianNotPD)?;
    let mut y = -factor.solve(&b);
    let r = &h * &y + &b;
    y -= factor.solve(&r);
    let mut z = Vector::zeros(qp.b.len());
    for (slot, &i) in keep.iter().enumerate() {
        z[i] = y[slot];
    }
    let resid = (&qp.h * &z + &qp.b).norm() / qp.b.norm().max(f64::MIN_POSITIVE);
    let minimum = qp.c + qp.b.dot(&z);
    Ok(QpSolution { tree: PolicyTree::from_vector(qp.layout, &z), minimum, residual: resid })
}

/// Expected cost conditional on `θ(0) = first_mode` when the first decision is
/// pinned to `u0` and every later decision is optimized, with zero initial data.
/// Pinned and unreachable variables are eliminated, not penalized.
pub fn fixed_first_decision_cost(
    model: &JumpLinearModel,
    init: &InitialData,
    first_mode: usize,
    u0: &Vector,
    budget: u128,
) -> Result<f64> {
    model.check_mode(first_mode)?;
    if !init.is_zero() {
        return Err(Error::InvalidArgument { arg: "init", reason: "x0 and u_pre must be zero".into() });
    }
    if u0.len() != model.m {
        return Err(Error::ShapeMismatch { expected: (model.m, 1), got: (u0.len(), 1) });
    }
    let mut conditioned = model.clone();
    conditioned.pi0 = (0..model.modes).map(|l| if l == first_mode { 1.0 } else { 0.0 }).collect();
    let qp = build_qp(&conditioned, init, budget)?;
    let pinned_start = qp.layout.block(0, &[first_mode]);
    let pinned: Vec<usize> = (pinned_start..pinned_start + model.m).collect();
    let free: Vec<usize> = qp.reachable().into_iter().filter(|i| !pinned.contains(i)).collect();

    let h_pp = qp.h.select_rows(&pinned).select_columns(&pinned);
    let b_p = qp.b.select_rows(&pinned);
    let mut value = qp.c + 2.0 * b_p.dot(u0) + u0.dot(&(&h_pp * u0));
    if !free.is_empty() {
        let h_ff = qp.h.select_rows(&free).select_columns(&free);
        let h_fp = qp.h.select_rows(&free).select_columns(&pinned);
        let g = qp.b.select_rows(&free) + h_fp * u0;
        let factor = ScaledFactor::new(&h_ff).ok_or(Error::HessianNotPD)?;
        value -= g.dot(&factor.solve(&g));
    }
    Ok(value)
}
