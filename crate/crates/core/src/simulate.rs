//! Chain sampling, closed-loop rollouts, Monte Carlo and exact expected cost.
//!
//! PRNG contract: run `r` of a Monte Carlo batch with seed `s` draws from
//! `ChaCha20Rng::seed_from_u64(run_seed(s, r))`, where `run_seed` is a
//! SplitMix64 finalizer applied twice. Each uniform is
//! `(next_u64() >> 11) · 2⁻⁵³`; a categorical draw returns the first index whose
//! cumulative probability exceeds the uniform. θ(0) is drawn from `pi0`, then
//! θ(1), ..., θ(N+1) from the rows of `trans`, one uniform each.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{path_from_index, InitialData, JumpLinearModel};
use crate::policy::{propagate, Policy};

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    /// `θ(0..=N+1)`.
    pub modes: Vec<usize>,
    /// `x(0..=N+1)`.
    pub states: Vec<Vector>,
    /// `u(-d..=N-d)`.
    pub decisions: Vec<Vector>,
    pub cost: f64,
}

impl Trajectory {
    /// Largest relative dynamics residual and the cost re-accumulation error.
    pub fn check(&self, model: &JumpLinearModel) -> (f64, f64) {
        let mut dyn_resid = 0.0_f64;
        for k in 0..=model.horizon {
            let mode = self.modes[k];
            let next = &model.a[mode] * &self.states[k] + &model.b[mode] * &self.decisions[k];
            let scale = next.amax().max(self.states[k + 1].amax()).max(1.0);
            dyn_resid = dyn_resid.max((&next - &self.states[k + 1]).amax() / scale);
        }
        let cost = realized_cost(model, &self.modes, &self.states, &self.decisions);
        (dyn_resid, (cost - self.cost).abs() / cost.abs().max(1.0))
    }
}

/// `Σ_{k=0}^N x'Qx + Σ_{k=d}^N u(k-d)'R u(k-d) + x(N+1)'P x(N+1)` along one path.
pub fn realized_cost(model: &JumpLinearModel, modes: &[usize], states: &[Vector], decisions: &[Vector]) -> f64 {
    let n = model.horizon;
    let mut cost = 0.0;
    for k in 0..=n {
        let (x, mode) = (&states[k], modes[k]);
        cost += x.dot(&(&model.q[mode] * x));
        if k >= model.delay {
            let u = &decisions[k];
            cost += u.dot(&(&model.r[mode] * u));
        }
    }
    let x = &states[n + 1];
    cost + x.dot(&(&model.p_term[modes[n + 1]] * x))
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` in a batch seeded with `seed`.
pub fn run_seed(seed: u64, run: u64) -> u64 {
    splitmix64(seed ^ splitmix64(run))
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn categorical(probs: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// One chain path `θ(0..=N+1)` from an explicit generator.
pub fn sample_chain_with(model: &JumpLinearModel, rng: &mut impl RngCore) -> Vec<usize> {
    let mut modes = Vec::with_capacity(model.horizon + 2);
    modes.push(categorical(model.pi0.iter().copied(), uniform(rng)));
    for _ in 0..=model.horizon {
        let from = *modes.last().expect("non-empty");
        modes.push(categorical(model.trans.row(from).iter().copied(), uniform(rng)));
    }
    modes
}

/// One chain path `θ(0..=N+1)` from `ChaCha20Rng::seed_from_u64(seed)`.
pub fn sample_chain(model: &JumpLinearModel, seed: u64) -> Vec<usize> {
    sample_chain_with(model, &mut ChaCha20Rng::seed_from_u64(seed))
}

/// Closed loop along `modes = θ(0..=N+1)`.
pub fn rollout(model: &JumpLinearModel, policy: &dyn Policy, init: &InitialData, modes: &[usize]) -> Result<Trajectory> {
    if modes.len() != model.horizon + 2 {
        return Err(Error::InvalidArgument { arg: "modes", reason: format!("expected N+2 = {} modes", model.horizon + 2) });
    }
    let roll = propagate(model, policy, init, modes)?;
    let cost = realized_cost(model, modes, &roll.states, &roll.decisions);
    Ok(Trajectory { modes: modes.to_vec(), states: roll.states, decisions: roll.decisions, cost })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_error: f64,
}

/// Trajectory of run `run` in a batch seeded with `seed`.
pub fn run_trajectory(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    seed: u64,
    run: u64,
) -> Result<Trajectory> {
    let modes = sample_chain(model, run_seed(seed, run));
    rollout(model, policy, init, &modes)
}

/// Sample mean and standard error of realized costs. `threads = None` uses the
/// global pool; the result does not depend on the thread count.
pub fn monte_carlo_cost(
    model: &JumpLinearModel,
    policy: &dyn Policy,
    init: &InitialData,
    runs: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(Error::InvalidArgument { arg: "runs", reason: "must be at least 1".into() });
    }
    let work = || {
        (0..runs as u64)
            .into_par_iter()
            .map(|r| run_trajectory(model, policy, init, seed, r).map(|t| t.cost))
            .collect::<Result<Vec<f64>>>()
    };
    let costs = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument { arg: "threads", reason: e.to_string() })?
            .install(work)?,
        None => work()?,
    };
    let mean = costs.iter().sum::<f64>() / runs as f64;
    let std_error = if runs > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        (var / runs as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloSummary { runs, seed, mean, std_error })
}

/// Σ over all `L^{N+2}` chain paths of probability × realized cost.
pub fn exact_expected_cost(model: &JumpLinearModel, policy: &dyn Policy, init: &InitialData, budget: u128) -> Result<f64> {
    crate::oracle::check_budget(model, budget)?;
    let len = model.horizon + 2;
    let mut total = 0.0;
    for idx in 0..model.modes.pow(len as u32) {
        let modes = path_from_index(idx, len, model.modes);
        let w = model.path_weight(&modes);
        if w == 0.0 {
            continue;
        }
        total += w * rollout(model, policy, init, &modes)?.cost;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ClosedLoop;
    use crate::linalg::Mat;
    use crate::model::two_mode_example;
    use crate::policy::ZeroPolicy;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of SplitMix64 seeded with 0 (state advanced by the golden gamma).
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn degenerate_chain_is_constant() {
        let mut p = two_mode_example();
        p.model.trans = Mat::identity(2, 2);
        p.model.pi0 = vec![1.0, 0.0];
        for seed in 0..20 {
            assert!(sample_chain(&p.model, seed).iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = two_mode_example();
        assert_eq!(sample_chain(&p.model, 42), sample_chain(&p.model, 42));
        assert_eq!(sample_chain(&p.model, 42).len(), p.model.horizon + 2);
    }

    #[test]
    fn empirical_transition_frequencies() {
        let p = two_mode_example();
        let mut counts = [[0usize; 2]; 2];
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut steps = 0;
        while steps < 100_000 {
            let path = sample_chain_with(&p.model, &mut rng);
            for w in path.windows(2) {
                counts[w[0]][w[1]] += 1;
                steps += 1;
            }
        }
        for from in 0..2 {
            let total = (counts[from][0] + counts[from][1]) as f64;
            let p_hat = counts[from][1] as f64 / total;
            let p_true = p.model.transition(from, 1);
            let sigma = (p_true * (1.0 - p_true) / total).sqrt();
            assert!((p_hat - p_true).abs() < 3.0 * sigma, "row {from}: {p_hat} vs {p_true}");
        }
    }

    #[test]
    fn zero_initial_data_gives_zero_trajectory() {
        let p = two_mode_example();
        let cl = ClosedLoop::solve(&p.model).unwrap();
        let init = InitialData::zero(&p.model);
        let tr = rollout(&p.model, &cl, &init, &sample_chain(&p.model, 3)).unwrap();
        assert_eq!(tr.cost, 0.0);
        assert!(tr.states.iter().all(|x| x.amax() == 0.0));
    }

    #[test]
    fn trajectory_invariants_hold() {
        let p = two_mode_example();
        let cl = ClosedLoop::solve(&p.model).unwrap();
        for seed in 0..10 {
            let tr = run_trajectory(&p.model, &cl, &p.init, seed, 0).unwrap();
            let (dyn_resid, cost_resid) = tr.check(&p.model);
            assert!(dyn_resid < 1e-12 && cost_resid < 1e-12);
            assert!(tr.cost >= 0.0);
            assert_eq!(tr.decisions.len(), p.model.horizon + 1);
        }
    }

    #[test]
    fn single_mode_has_zero_variance() {
        let mut p = two_mode_example();
        let md = &mut p.model;
        md.modes = 1;
        md.a.truncate(1);
        md.b.truncate(1);
        md.q.truncate(1);
        md.r.truncate(1);
        md.p_term.truncate(1);
        md.trans = Mat::identity(1, 1);
        md.pi0 = vec![1.0];
        let cl = ClosedLoop::solve(md).unwrap();
        let mc = monte_carlo_cost(md, &cl, &p.init, 20, 1, Some(2)).unwrap();
        let single = rollout(md, &cl, &p.init, &vec![0; md.horizon + 2]).unwrap().cost;
        assert!(mc.std_error < 1e-12 * single);
        assert!((mc.mean - single).abs() < 1e-12 * single);
        let exact = exact_expected_cost(md, &cl, &p.init, 10).unwrap();
        assert_eq!(exact, single);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let p = two_mode_example();
        let cl = ClosedLoop::solve(&p.model).unwrap();
        let one = monte_carlo_cost(&p.model, &cl, &p.init, 500, 9, Some(1)).unwrap();
        let four = monte_carlo_cost(&p.model, &cl, &p.init, 500, 9, Some(4)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn exact_cost_respects_budget_and_optimality() {
        let p = two_mode_example();
        let cl = ClosedLoop::solve(&p.model).unwrap();
        assert!(matches!(
            exact_expected_cost(&p.model, &cl, &p.init, 100),
            Err(Error::PathBudgetExceeded { required: 512, budget: 100 })
        ));
        let opt = exact_expected_cost(&p.model, &cl, &p.init, 1 << 20).unwrap();
        let zero = exact_expected_cost(&p.model, &ZeroPolicy::new(&p.model), &p.init, 1 << 20).unwrap();
        assert!(zero >= opt);
    }
}
