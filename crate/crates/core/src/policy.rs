//! Interchangeable decision rules behind one trait, plus a by-name registry.
//!
//! Every policy answers the same question: given the chain history `θ(0..=t)`,
//! the measured state `x(t)` and the last `d` decisions `u(t-d..t-1)`, which
//! `u(t)` is decided at time `t`? Decisions exist for `t = 0..=N-d`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{InitialData, JumpLinearModel, Problem};

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn decide(&self, t: usize, prefix: &[usize], x_t: &Vector, history: &[Vector]) -> Result<Vector>;
}

/// States and decisions along a (possibly partial) mode sequence.
#[derive(Clone, Debug)]
pub struct PathRollout {
    /// `x(0) ..= x(len)` for a mode sequence of length `len`.
    pub states: Vec<Vector>,
    /// `decisions[i]` is `u(i - d)`; pre-horizon entries come first.
    pub decisions: Vec<Vector>,
}

/// Closed-loop propagation of `x(k+1) = A x(k) + B u(k-d)` along `modes = θ(0..len)`.
pub fn propagate(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    modes: &[usize],
) -> Result<PathRollout> {
    let d = model.delay;
    let last = model.last_decision();
    if modes.len() > model.horizon + 2 {
        return Err(Error::InvalidArgument {
            arg: "modes",
            reason: format!("at most N+2 = {} modes", model.horizon + 2),
        });
    }
    let mut states = Vec::with_capacity(modes.len() + 1);
    let mut decisions = init.u_pre.clone();
    states.push(init.x0.clone());
    for (k, &mode) in modes.iter().enumerate() {
        model.check_mode(mode)?;
        let x = &states[k];
        if k <= last {
            let u = policy.decide(k, &modes[..=k], x, &decisions[k..k + d])?;
            if u.len() != model.m {
                return Err(Error::ShapeMismatch { expected: (model.m, 1), got: (u.len(), 1) });
            }
            decisions.push(u);
        }
        let next = if k <= model.horizon {
            &model.a[mode] * x + &model.b[mode] * &decisions[k]
        } else {
            break;
        };
        states.push(next);
    }
    Ok(PathRollout { states, decisions })
}

/// Always decides zero.
#[derive(Clone, Debug)]
pub struct ZeroPolicy {
    m: usize,
}

impl ZeroPolicy {
    pub fn new(model: &JumpLinearModel) -> Self {
        Self { m: model.m }
    }
}

impl Policy for ZeroPolicy {
    fn name(&self) -> &str {
        "zero"
    }

    fn decide(&self, _t: usize, _prefix: &[usize], _x_t: &Vector, _history: &[Vector]) -> Result<Vector> {
        Ok(Vector::zeros(self.m))
    }
}

/// Inputs handed to a policy builder.
pub struct PolicyContext<'a> {
    pub problem: &'a Problem,
    /// Full-path budget for builders that enumerate the chain.
    pub budget: u128,
}

pub type PolicyBuilder = fn(&PolicyContext<'_>) -> Result<Box<dyn Policy>>;

struct Entry {
    description: &'static str,
    build: PolicyBuilder,
}

/// Name → builder map. `with_builtins` registers every policy shipped here.
#[derive(Default)]
pub struct PolicyRegistry {
    entries: BTreeMap<String, Entry>,
}

impl fmt::Debug for PolicyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register("riccati", "optimal law from the coupled Riccati tables", |ctx| {
            let sol = crate::controller::ClosedLoop::solve(&ctx.problem.model)?;
            Ok(Box::new(sol))
        });
        reg.register("qp-tree", "argmin of the exact policy-tree QP (oracle)", |ctx| {
            let qp = crate::oracle::build_qp(&ctx.problem.model, &ctx.problem.init, ctx.budget)?;
            let sol = crate::oracle::solve_qp(&qp)?;
            Ok(Box::new(sol.tree))
        });
        reg.register("zero", "no control", |ctx| Ok(Box::new(ZeroPolicy::new(&ctx.problem.model))));
        reg.register(
            "frozen-mode",
            "delay-free coupled Riccati gains on a frozen-mode d-step prediction",
            |ctx| Ok(Box::new(crate::oracle::FrozenModePredictor::new(&ctx.problem.model)?)),
        );
        reg.register("augmented-lqr", "augmented-state LQR (single-mode models only)", |ctx| {
            Ok(Box::new(crate::oracle::augmented_lqr(&ctx.problem.model)?))
        });
        reg
    }

    pub fn register(&mut self, name: &str, description: &'static str, build: PolicyBuilder) {
        self.entries.insert(name.to_string(), Entry { description, build });
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.description))
    }

    pub fn build(&self, name: &str, ctx: &PolicyContext<'_>) -> Result<Box<dyn Policy>> {
        let entry = self.entries.get(name).ok_or_else(|| Error::UnknownPolicy(name.to_string()))?;
        (entry.build)(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_mode_example;

    #[test]
    fn registry_lists_builtins_and_rejects_unknown() {
        let reg = PolicyRegistry::with_builtins();
        let names: Vec<_> = reg.names().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["augmented-lqr", "frozen-mode", "qp-tree", "riccati", "zero"]);
        let p = two_mode_example();
        let ctx = PolicyContext { problem: &p, budget: 1_000_000 };
        assert!(matches!(reg.build("nope", &ctx), Err(Error::UnknownPolicy(_))));
        assert_eq!(reg.build("riccati", &ctx).unwrap().name(), "riccati");
        // single-mode only
        assert!(reg.build("augmented-lqr", &ctx).is_err());
    }

    #[test]
    fn propagate_zero_policy_is_open_loop() {
        let p = two_mode_example();
        let md = &p.model;
        let modes = vec![1, 1, 0];
        let roll = propagate(md, &ZeroPolicy::new(md), &p.init, &modes).unwrap();
        assert_eq!(roll.states.len(), 4);
        assert_eq!(roll.decisions.len(), 2 + 3);
        let x1 = &md.a[1] * &p.init.x0 + &md.b[1] * &p.init.u_pre[0];
        assert_eq!(roll.states[1], x1);
        let x3 = &md.a[0] * &roll.states[2] + &md.b[0] * &roll.decisions[2];
        assert_eq!(roll.states[3], x3);
    }
}
