//! Acceptance gates. Runs as a plain binary and prints one PASS/FAIL line per
//! criterion; exits non-zero if any gate fails.

use std::process::ExitCode;
use std::time::Instant;

use mjls_core::controller::{gains, optimal_cost, ClosedLoop};
use mjls_core::linalg::{Mat, Vector};
use mjls_core::model::{two_mode_example, InitialData, Problem};
use mjls_core::oracle::{
    augmented_lqr, build_qp, equivalent_augmented_gain, fixed_first_decision_cost, is_positive_definite, solve_qp,
    stationarity_residual, PolicyTree,
};
use mjls_core::random::{random_problem, sweep_shape, InstanceShape};
use mjls_core::reproduce::{reproduce, Status, REFERENCE_OPTIMAL_COST};
use mjls_core::riccati::solve_riccati;
use mjls_core::simulate::{exact_expected_cost, monte_carlo_cost};
use mjls_core::verify::{verify, VerifyReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const BUDGET: u128 = 1_000_000;
const SUITE: usize = 60;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: usize, name: &str, passed: bool, detail: String) {
        let status = if passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name}: {detail}");
        if !passed {
            self.failed += 1;
        }
    }
}

fn suite() -> Vec<Problem> {
    let mut out = vec![two_mode_example()];
    out.extend((0..SUITE).map(|i| random_problem(sweep_shape(i, 20_000, 600), 1000 + i as u64)));
    out
}

fn check(report: &VerifyReport, name: &str) -> f64 {
    report.checks.iter().find(|c| c.name == name).map(|c| c.value).unwrap_or(f64::INFINITY)
}

fn worst(reports: &[VerifyReport], name: &str) -> f64 {
    reports.iter().map(|r| check(r, name)).fold(0.0, f64::max)
}

fn final_w(gate: &mut Gate) {
    let start = Instant::now();
    let md = two_mode_example().model;
    let tables = solve_riccati(&md);
    let t = md.last_decision();
    let (w1, w2) = (tables.w(t, 0)[(0, 0)], tables.w(t, 1)[(0, 0)]);
    let secs = start.elapsed().as_secs_f64();
    let ok = (w1 - 3.64).abs() < 1e-3 && (w2 - 5.08).abs() < 1e-3 && secs < 1.0;
    gate.report(1, "final-decision W", ok, format!("W1={w1:.6} W2={w2:.6} at t={t}, {secs:.3}s"));
}

fn printed_gains(gate: &mut Gate) {
    let report = match reproduce(50, 0, BUDGET) {
        Ok(r) => r,
        Err(e) => return gate.report(2, "reference gains", false, e.to_string()),
    };
    let worst = report.gains.iter().map(|r| (r.printed - r.computed).abs()).fold(0.0, f64::max);
    let gains_ok = report.gains.iter().all(|r| r.status == Status::Match);
    let table_match = report.table.iter().filter(|r| r.status == Status::Match).count();
    let ambiguous = report.table.iter().filter(|r| r.status == Status::Ambiguous).count();
    let mismatched = report.table.iter().filter(|r| r.status == Status::Mismatch).count();
    gate.report(
        2,
        "reference gains",
        gains_ok && mismatched == 0,
        format!(
            "{} gain coefficients, max |diff| {worst:.2e}; table {table_match} MATCH, {ambiguous} AMBIGUOUS (row k=5)",
            report.gains.len()
        ),
    );
}

fn oracle_suite(gate: &mut Gate, problems: &[Problem]) -> Vec<VerifyReport> {
    let start = Instant::now();
    let mut reports = Vec::with_capacity(problems.len());
    for p in problems {
        match verify(p, BUDGET, 1e-8) {
            Ok(r) => reports.push(r),
            Err(e) => {
                gate.report(3, "oracle equivalence", false, format!("{e}"));
                return reports;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let dec = worst(&reports, "decisions_vs_qp_argmin");
    let cost = worst(&reports, "optimal_cost_vs_qp_minimum");
    let exact = worst(&reports, "exact_cost_vs_qp_minimum");
    let ok = dec <= 1e-8 && cost <= 1e-8 && exact <= 1e-8 && secs < 30.0;
    gate.report(
        3,
        "oracle equivalence",
        ok,
        format!("{} instances, decisions {dec:.1e}, J vs QP {cost:.1e}, exact vs QP {exact:.1e}, {secs:.1}s", reports.len()),
    );
    reports
}

fn identities(gate: &mut Gate, reports: &[VerifyReport]) {
    let r = worst(reports, "riccati_identities");
    gate.report(4, "table identities", r < 1e-9 && !reports.is_empty(), format!("max residual {r:.1e}"));
}

fn stationarity(gate: &mut Gate, problems: &[Problem], reports: &[VerifyReport]) {
    let at_opt = worst(reports, "stationarity");
    let mut perturbed = f64::INFINITY;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for p in problems.iter().take(20) {
        let result = (|| {
            let cl = ClosedLoop::solve(&p.model)?;
            let tree = PolicyTree::from_policy(&p.model, &cl, &p.init)?;
            let z = tree.to_vector();
            let dz = Vector::from_fn(z.len(), |_, _| if rng.random::<bool>() { 1e-3 } else { -1e-3 });
            let bumped = PolicyTree::from_vector(tree.layout, &(z + dz));
            stationarity_residual(&p.model, &bumped, &p.init, BUDGET)
        })();
        match result {
            Ok(s) => perturbed = perturbed.min(s.max_abs),
            Err(e) => return gate.report(5, "stationarity", false, e.to_string()),
        }
    }
    gate.report(
        5,
        "stationarity",
        at_opt < 1e-9 && perturbed > 1e-6,
        format!("optimum {at_opt:.1e}, smallest under 1e-3 perturbation {perturbed:.1e}"),
    );
}

fn costates(gate: &mut Gate, reports: &[VerifyReport]) {
    let r = worst(reports, "costate_vs_definitional");
    gate.report(6, "costate identity", r < 1e-9 && !reports.is_empty(), format!("max relative diff {r:.1e}"));
}

fn single_mode(gate: &mut Gate, problems: &[Problem]) {
    let mut cases: Vec<Problem> = problems.iter().filter(|p| p.model.modes == 1).cloned().collect();
    let mut degenerate = random_problem(InstanceShape { n: 2, m: 1, modes: 1, delay: 1, horizon: 4 }, 3);
    degenerate.model.a[0] = Mat::zeros(2, 2);
    cases.push(degenerate);
    let mut diff = 0.0_f64;
    for p in &cases {
        let (aug, tables) = match augmented_lqr(&p.model) {
            Ok(a) => (a, solve_riccati(&p.model)),
            Err(e) => return gate.report(7, "single-mode reduction", false, e.to_string()),
        };
        let schedule = match gains(&tables) {
            Ok(s) => s,
            Err(e) => return gate.report(7, "single-mode reduction", false, e.to_string()),
        };
        for (t, reference) in aug.gains.iter().enumerate() {
            let ours = equivalent_augmented_gain(&p.model, &schedule, t, 0);
            diff = diff.max((ours - reference).amax() / reference.amax().max(1.0));
        }
    }
    gate.report(7, "single-mode reduction", diff < 1e-9, format!("{} instances, max gain diff {diff:.1e}", cases.len()));
}

fn boundary_instances() -> Vec<(&'static str, Problem)> {
    let base = |n, m, seed| random_problem(InstanceShape { n, m, modes: 2, delay: 2, horizon: 5 }, seed);
    let mut out = Vec::new();

    let mut p = base(2, 1, 41);
    p.model.r.iter_mut().for_each(|r| r.fill(0.0));
    p.model.q.iter_mut().for_each(|q| q.fill(0.0));
    p.model.p_term.iter_mut().for_each(|q| q.fill(0.0));
    out.push(("R=Q=P=0", p));

    let mut p = base(2, 1, 42);
    p.model.r.iter_mut().for_each(|r| r.fill(0.0));
    out.push(("R=0", p));

    let mut p = base(1, 2, 43);
    p.model.r.iter_mut().for_each(|r| r.fill(0.0));
    out.push(("R=0, m>n", p));

    let mut p = base(2, 2, 44);
    for r in p.model.r.iter_mut() {
        *r = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    }
    p.model.q.iter_mut().for_each(|q| q.fill(0.0));
    p.model.p_term.iter_mut().for_each(|q| q.fill(0.0));
    out.push(("rank-one R, Q=P=0", p));

    let mut p = base(2, 2, 45);
    for r in p.model.r.iter_mut() {
        *r = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    }
    out.push(("rank-one R", p));
    out
}

fn solvability(gate: &mut Gate, problems: &[Problem]) {
    let mut cases: Vec<(String, Problem)> =
        problems.iter().enumerate().map(|(i, p)| (format!("suite {i}"), p.clone())).collect();
    cases.extend(boundary_instances().into_iter().map(|(name, p)| (name.to_string(), p)));
    let mut disagree = Vec::new();
    let mut singular = Vec::new();
    for (name, p) in &cases {
        let w_pd = solve_riccati(&p.model).is_solvable();
        let h_pd = match build_qp(&p.model, &p.init, BUDGET) {
            Ok(qp) => is_positive_definite(&qp),
            Err(e) => return gate.report(8, "solvability equivalence", false, e.to_string()),
        };
        if w_pd != h_pd {
            disagree.push(name.clone());
        }
        if !w_pd {
            singular.push(name.clone());
        }
    }
    let zero_weights_fail = singular.iter().any(|s| s == "R=Q=P=0");
    gate.report(
        8,
        "solvability equivalence",
        disagree.is_empty() && zero_weights_fail,
        format!("{} instances, disagreements {:?}, not solvable {:?}", cases.len(), disagree, singular),
    );
}

fn first_decision_quadratic(gate: &mut Gate, problems: &[Problem]) {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut diff = 0.0_f64;
    let mut count = 0;
    for p in problems {
        let md = &p.model;
        let tables = solve_riccati(md);
        let zero = InitialData::zero(md);
        for k in 0..10 {
            let mode = k % md.modes;
            let u0 = Vector::from_fn(md.m, |_, _| rng.random_range(-2.0..2.0));
            let expected = u0.dot(&(tables.w(0, mode) * &u0));
            match fixed_first_decision_cost(md, &zero, mode, &u0, BUDGET) {
                Ok(v) => diff = diff.max((v - expected).abs() / expected.abs().max(1.0)),
                Err(e) => return gate.report(9, "first-decision quadratic term", false, e.to_string()),
            }
            count += 1;
        }
    }
    gate.report(9, "first-decision quadratic term", diff < 1e-9, format!("{count} draws, max relative diff {diff:.1e}"));
}

fn optimal_cost_report(gate: &mut Gate) {
    let p = two_mode_example();
    let result = (|| {
        let cl = ClosedLoop::solve(&p.model)?;
        let j = optimal_cost(&p.model, &cl.tables, &p.init)?;
        let qp = solve_qp(&build_qp(&p.model, &p.init, BUDGET)?)?.minimum;
        mjls_core::Result::Ok((j, qp))
    })();
    match result {
        Ok((j, qp)) => {
            let rel = (j - qp).abs() / qp.abs().max(1.0);
            gate.report(
                10,
                "optimal cost",
                rel <= 1e-8,
                format!(
                    "closed form {j:.6}, QP minimum {qp:.6} (rel {rel:.1e}); reference {REFERENCE_OPTIMAL_COST} differs by {:.4}",
                    j - REFERENCE_OPTIMAL_COST
                ),
            );
        }
        Err(e) => gate.report(10, "optimal cost", false, e.to_string()),
    }
}

fn monte_carlo(gate: &mut Gate) {
    let p = two_mode_example();
    let result = (|| {
        let cl = ClosedLoop::solve(&p.model)?;
        let exact = exact_expected_cost(&p.model, &cl, &p.init, BUDGET)?;
        let one = monte_carlo_cost(&p.model, &cl, &p.init, 10_000, 0, Some(1))?;
        let many = monte_carlo_cost(&p.model, &cl, &p.init, 10_000, 0, Some(4))?;
        mjls_core::Result::Ok((exact, one, many))
    })();
    match result {
        Ok((exact, one, many)) => {
            let z = (one.mean - exact) / one.std_error;
            let same = one.mean.to_bits() == many.mean.to_bits() && one.std_error.to_bits() == many.std_error.to_bits();
            gate.report(
                11,
                "Monte Carlo",
                z.abs() < 4.0 && same,
                format!(
                    "mean {:.4} ± {:.4} vs exact {exact:.4} ({z:+.2} se), 1 vs 4 threads identical: {same}",
                    one.mean, one.std_error
                ),
            );
        }
        Err(e) => gate.report(11, "Monte Carlo", false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    let problems = suite();
    final_w(&mut gate);
    printed_gains(&mut gate);
    let reports = oracle_suite(&mut gate, &problems);
    identities(&mut gate, &reports);
    stationarity(&mut gate, &problems, &reports);
    costates(&mut gate, &reports);
    single_mode(&mut gate, &problems);
    solvability(&mut gate, &problems);
    first_decision_quadratic(&mut gate, &problems);
    optimal_cost_report(&mut gate);
    monte_carlo(&mut gate);
    println!("acceptance: {} of 11 criteria failed", gate.failed);
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
