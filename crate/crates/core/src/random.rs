//! Seeded random problem instances for property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::{symmetrize, Mat, Vector};
use crate::model::{InitialData, JumpLinearModel, Problem};

#[derive(Clone, Copy, Debug)]
pub struct InstanceShape {
    pub n: usize,
    pub m: usize,
    pub modes: usize,
    pub delay: usize,
    pub horizon: usize,
}

fn uniform_mat(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0) * scale)
}

fn gram(rng: &mut impl Rng, dim: usize, shift: f64) -> Mat {
    let g = uniform_mat(rng, dim, dim, 1.0);
    symmetrize(&(&g * g.transpose() + Mat::identity(dim, dim) * shift))
}

fn stochastic_row(rng: &mut impl Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let spare = 1.0 - floor * len as f64;
    let mut row: Vec<f64> = raw.iter().map(|v| floor + spare * v / total).collect();
    let fix: f64 = row[..len - 1].iter().sum();
    row[len - 1] = 1.0 - fix;
    row
}

/// Model with `A ~ U(-0.7, 0.7)`, `B ~ U(-1, 1)`, `Q = GG'`, `R = HH' + 0.1I`,
/// `P = GG'`, every transition and initial probability at least `0.05 / L`,
/// and nonzero initial data.
pub fn random_problem(shape: InstanceShape, seed: u64) -> Problem {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let InstanceShape { n, m, modes, delay, horizon } = shape;
    let a = (0..modes).map(|_| uniform_mat(&mut rng, n, n, 0.7)).collect();
    let b = (0..modes).map(|_| uniform_mat(&mut rng, n, m, 1.0)).collect();
    let q = (0..modes).map(|_| gram(&mut rng, n, 0.0)).collect();
    let r = (0..modes).map(|_| gram(&mut rng, m, 0.1)).collect();
    let p_term = (0..modes).map(|_| gram(&mut rng, n, 0.0)).collect();
    let floor = 0.05 / modes as f64;
    let rows: Vec<Vec<f64>> = (0..modes).map(|_| stochastic_row(&mut rng, modes, floor)).collect();
    let trans = Mat::from_fn(modes, modes, |i, j| rows[i][j]);
    let pi0 = stochastic_row(&mut rng, modes, floor);
    let x0 = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let u_pre = (0..delay).map(|_| Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))).collect();
    let model = JumpLinearModel { n, m, modes, a, b, q, r, p_term, trans, pi0, delay, horizon };
    Problem { model, init: InitialData { x0, u_pre } }
}

/// Shape for the `i`-th instance of a sweep over `d, L ∈ 1..=3`, `n, m ∈ 1..=2`
/// and `N ≤ 8`, shortened until the full path count is at most `max_paths` and
/// the policy tree has at most `max_vars` variables.
pub fn sweep_shape(i: usize, max_paths: u128, max_vars: usize) -> InstanceShape {
    let delay = 1 + i % 3;
    let modes = 1 + (i / 3) % 3;
    let n = 1 + (i / 9) % 2;
    let m = 1 + (i / 18) % 2;
    let mut horizon = (delay + 2 + (i / 36 + i) % 4).min(8);
    let vars = |h: usize| (0..=h - delay).map(|t| modes.pow(t as u32 + 1) * m).sum::<usize>();
    while horizon > delay + 1 && ((modes as u128).pow(horizon as u32 + 2) > max_paths || vars(horizon) > max_vars) {
        horizon -= 1;
    }
    InstanceShape { n, m, modes, delay, horizon }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn instances_validate() {
        for i in 0..72 {
            let shape = sweep_shape(i, 20_000, 600);
            let p = random_problem(shape, i as u64);
            let report = validate_model(&p.to_file());
            assert!(report.passed(), "{i}: {report}");
            assert!(p.model.full_path_count() <= 20_000);
            assert!(p.model.horizon > p.model.delay);
        }
    }

    #[test]
    fn seeded_instances_repeat() {
        let shape = sweep_shape(5, 10_000, 600);
        let a = random_problem(shape, 3);
        let b = random_problem(shape, 3);
        assert_eq!(a.model.a, b.model.a);
        assert_eq!(a.init.x0, b.init.x0);
    }
}
