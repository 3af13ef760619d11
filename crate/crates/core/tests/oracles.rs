use mjls_core::controller::{optimal_cost, ClosedLoop};
use mjls_core::linalg::{Mat, Vector};
use mjls_core::model::{two_mode_example, path_from_index, InitialData};
use mjls_core::oracle::{
    augmented_lqr, build_qp, definitional_costate, definitional_costates_all, fixed_first_decision_cost, solve_qp,
    standard_coupled_riccati, stationarity_residual, PolicyTree,
};
use mjls_core::policy::{propagate, ZeroPolicy};
use mjls_core::random::{random_problem, InstanceShape};
use mjls_core::reproduce::REFERENCE_GAINS;
use mjls_core::simulate::exact_expected_cost;
use mjls_core::verify::verify;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const BUDGET: u128 = 1_000_000;

fn shape(n: usize, m: usize, modes: usize, delay: usize, horizon: usize) -> InstanceShape {
    InstanceShape { n, m, modes, delay, horizon }
}

#[test]
fn perturbed_trees_cost_more() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for (i, s) in [shape(2, 1, 2, 2, 5), shape(1, 2, 3, 1, 3), shape(2, 2, 2, 3, 5)].into_iter().enumerate() {
        let p = random_problem(s, 50 + i as u64);
        let cl = ClosedLoop::solve(&p.model).unwrap();
        let j = optimal_cost(&p.model, &cl.tables, &p.init).unwrap();
        let qp = build_qp(&p.model, &p.init, BUDGET).unwrap();
        let z = PolicyTree::from_policy(&p.model, &cl, &p.init).unwrap().to_vector();
        for _ in 0..5 {
            let dz = Vector::from_fn(z.len(), |_, _| rng.random_range(-0.1..0.1));
            let bumped = PolicyTree::from_vector(qp.layout, &(&z + dz));
            let cost = exact_expected_cost(&p.model, &bumped, &p.init, BUDGET).unwrap();
            assert!(cost > j);
            assert!((qp.evaluate(&bumped.to_vector()) - cost).abs() < 1e-9 * cost);
        }
    }
}

#[test]
fn single_mode_gains_equal_augmented_lqr() {
    for (seed, d) in [(1, 1), (2, 2), (3, 3)] {
        let p = random_problem(shape(2, 2, 1, d, d + 3), seed);
        let cl = ClosedLoop::solve(&p.model).unwrap();
        let aug = augmented_lqr(&p.model).unwrap();
        for (t, k) in aug.gains.iter().enumerate() {
            let ours = mjls_core::oracle::equivalent_augmented_gain(&p.model, &cl.schedule, t, 0);
            assert!((ours - k).amax() < 1e-9 * k.amax().max(1.0));
        }
        let j = optimal_cost(&p.model, &cl.tables, &p.init).unwrap();
        let z0 = aug.augmented_state(&p.init.x0, &p.init.u_pre);
        let qp = solve_qp(&build_qp(&p.model, &p.init, BUDGET).unwrap()).unwrap();
        assert!((z0.dot(&(&aug.value[0] * &z0)) - j).abs() < 1e-9 * j);
        assert!((qp.minimum - j).abs() < 1e-9 * j);
    }
}

#[test]
fn augmented_lqr_with_zero_dynamics() {
    let mut p = random_problem(shape(2, 1, 1, 1, 4), 8);
    p.model.a[0] = Mat::zeros(2, 2);
    let cl = ClosedLoop::solve(&p.model).unwrap();
    let aug = augmented_lqr(&p.model).unwrap();
    for (t, k) in aug.gains.iter().enumerate() {
        let ours = mjls_core::oracle::equivalent_augmented_gain(&p.model, &cl.schedule, t, 0);
        assert!((ours - k).amax() < 1e-12);
    }
}

#[test]
fn single_mode_costate_is_value_gradient() {
    let p = random_problem(shape(2, 1, 1, 2, 5), 21);
    let md = &p.model;
    let cl = ClosedLoop::solve(md).unwrap();
    let aug = augmented_lqr(md).unwrap();
    let table = definitional_costates_all(md, &cl, &p.init, BUDGET).unwrap();
    let d = md.delay;
    for i in 0..=md.horizon {
        let prefix = vec![0; i + 1];
        let roll = propagate(md, &cl, &p.init, &prefix).unwrap();
        let history: Vec<Vector> =
            (i + 1..=i + d).map(|j| roll.decisions.get(j).cloned().unwrap_or_else(|| Vector::zeros(md.m))).collect();
        let z = aug.augmented_state(&roll.states[i + 1], &history);
        let grad = (&aug.value[i + 1] * z).rows(0, md.n).into_owned();
        let lambda = table.get(&prefix);
        assert!((&grad - lambda).amax() < 1e-9 * lambda.amax().max(1.0), "i={i}");
        let closed = cl.costate(i + 1, &p.init, &prefix).unwrap();
        assert!((&closed - lambda).amax() < 1e-9 * lambda.amax().max(1.0), "i={i}");
    }
}

#[test]
fn delay_free_single_mode_is_classical_lqr() {
    let md = random_problem(shape(2, 2, 1, 1, 5), 4).model;
    let sol = standard_coupled_riccati(&md).unwrap();
    let (a, b, q, r) = (&md.a[0], &md.b[0], &md.q[0], &md.r[0]);
    let mut p = md.p_term[0].clone();
    for k in (0..=md.horizon).rev() {
        let gain = (r + b.transpose() * &p * b).try_inverse().unwrap() * b.transpose() * &p * a;
        assert!((&sol.gains[k][0] - &gain).amax() < 1e-10);
        p = q + a.transpose() * &p * a - a.transpose() * &p * b * &gain;
        assert!((&sol.p[k][0] - &p).amax() < 1e-10 * p.amax().max(1.0));
    }
}

#[test]
fn delay_free_without_state_weights_is_zero() {
    let mut md = random_problem(shape(2, 1, 2, 1, 4), 5).model;
    md.q.iter_mut().chain(md.p_term.iter_mut()).for_each(|w| w.fill(0.0));
    let sol = standard_coupled_riccati(&md).unwrap();
    assert!(sol.p.iter().flatten().all(|p| p.amax() == 0.0));
    assert!(sol.gains.iter().flatten().all(|k| k.amax() == 0.0));
}

#[test]
fn definitional_costates_satisfy_backward_recursion() {
    let p = random_problem(shape(2, 1, 2, 2, 5), 13);
    let md = &p.model;
    let policy = ZeroPolicy::new(md);
    for i in 1..=md.horizon {
        for idx in 0..md.modes.pow(i as u32) {
            let prefix = path_from_index(idx, i, md.modes);
            let earlier = definitional_costate(md, &policy, &p.init, &prefix, BUDGET).unwrap();
            let x = &propagate(md, &policy, &p.init, &prefix).unwrap().states[i];
            let mut expected = Vector::zeros(md.n);
            for l in 0..md.modes {
                let mut next = prefix.clone();
                next.push(l);
                let later = definitional_costate(md, &policy, &p.init, &next, BUDGET).unwrap();
                expected += (&md.q[l] * x + md.a[l].transpose() * later) * md.transition(prefix[i - 1], l);
            }
            assert!((&earlier - &expected).amax() < 1e-10 * expected.amax().max(1.0));
        }
    }
}

#[test]
fn no_input_authority_zero_policy_is_stationary() {
    let mut p = random_problem(shape(2, 2, 2, 2, 5), 17);
    p.model.b.iter_mut().for_each(|b| b.fill(0.0));
    let report = stationarity_residual(&p.model, &ZeroPolicy::new(&p.model), &p.init, BUDGET).unwrap();
    assert_eq!(report.max_abs, 0.0);
}

#[test]
fn two_mode_first_decision_quadratic_term() {
    let md = two_mode_example().model;
    let cl = ClosedLoop::solve(&md).unwrap();
    let zero = InitialData::zero(&md);
    let cost = fixed_first_decision_cost(&md, &zero, 0, &Vector::from_element(1, 1.0), BUDGET).unwrap();
    let w = cl.tables.w(0, 0)[(0, 0)];
    assert!((cost - w).abs() < 1e-9 * w);
    assert!((w - 23.7186).abs() < 1e-4);
}

#[test]
fn two_mode_gains_along_reference_modes() {
    let cl = ClosedLoop::solve(&two_mode_example().model).unwrap();
    for (k, (mode, [a, b, c])) in REFERENCE_GAINS.iter().enumerate() {
        let kx = &cl.schedule.kx[k + 1][mode - 1];
        let ku = cl.schedule.ku(1, k + 1, mode - 1);
        assert!((kx[(0, 0)] - a).abs() < 1e-3);
        assert!((kx[(0, 1)] - b).abs() < 1e-3);
        assert!((ku[(0, 0)] - c).abs() < 1e-3);
    }
}

#[test]
fn long_delay_instances_agree_with_oracle() {
    for seed in 0..3 {
        let p = random_problem(shape(2, 1, 2, 4, 6), 90 + seed);
        let report = verify(&p, BUDGET, 1e-8).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
