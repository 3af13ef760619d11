//! Backward sweep for the coupled difference Riccati equations of the delayed
//! jump system, plus the auxiliary δ/α tables that tie the costate to the state.
//!
//! All tables are indexed by absolute time `t ∈ 0..=N` and store a quantity at
//! the time of its mode subscript. Decision times are `0..=N-d`; the terminal
//! window `N-d+1..=N` holds `T = 0`, `P⁰ = 0` and identity placeholders for `W`.
//!
//! Per decision time `t` and mode `l` (with `k = t + d`):
//!
//! ```text
//! W   = Λ_d[B'(P-P⁰)B + R] − Σ_s Λ_{d-s}[T^s' W⁻¹ T^s]
//! T^0 = Λ_d[B'(P-P⁰)F]     − Σ_s Λ_{d-s}[T^s' W⁻¹ T^0 F]
//! T^j = Λ_d[B'(P-P⁰)F B]   − Σ_{s≤d-j} Λ_{d-s}[T^s' W⁻¹ T^0 F B] − Σ_{s>d-j} Λ_{d-s}[T^s' W⁻¹ T^{s-d+j}]
//! ```
//!
//! where the corrections are evaluated at `t + d - s`. `P` and `P⁰` follow one
//! step behind: `P(k-1) = Λ_1[Q + A'(P-P⁰)A]`, `P⁰ = T^0' W⁻¹ T^0`.

mod expectation;
mod identities;

pub use expectation::{backward_coefficients, backward_expectation, lambda_expectation, BackwardCoefficients};
pub use identities::check_table_identities;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, symmetrize, Mat, SpdFactor};
use crate::model::{enumerate_paths, f_product, path_from_index, path_index, JumpLinearModel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solvability {
    Solvable,
    /// First `W` (in sweep order) that failed the positive-definiteness test.
    NotPositiveDefinite { time: usize, mode: usize },
}

#[derive(Clone, Debug)]
pub struct RiccatiTables {
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) modes: usize,
    pub(crate) delay: usize,
    pub(crate) horizon: usize,
    pub(crate) w: Vec<Vec<Mat>>,
    pub(crate) w_factor: Vec<Vec<Option<SpdFactor>>>,
    /// `t[j][time][mode]`, `j = 0..d`.
    pub(crate) t: Vec<Vec<Vec<Mat>>>,
    pub(crate) p: Vec<Vec<Mat>>,
    pub(crate) p0: Vec<Vec<Mat>>,
    /// `delta[j][time][mode]`, `j = 1..d` (slot 0 unused). Stored as m×n.
    pub(crate) delta: Vec<Vec<Vec<Mat>>>,
    /// `alpha[g][time][path]`, `g = 1..d` (slot 0 unused). The path is the mode
    /// sequence at times `time-(d-g)+1 ..= time`. Stored as m×n.
    pub(crate) alpha: Vec<Vec<Vec<Mat>>>,
    pub solvability: Solvability,
    /// Largest relative asymmetry of W, P or P⁰ before symmetrization.
    pub max_asymmetry: f64,
}

impl RiccatiTables {
    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn last_decision(&self) -> usize {
        self.horizon - self.delay
    }

    pub fn is_solvable(&self) -> bool {
        self.solvability == Solvability::Solvable
    }

    pub fn require_solvable(&self) -> Result<()> {
        match self.solvability {
            Solvability::Solvable => Ok(()),
            Solvability::NotPositiveDefinite { .. } => Err(Error::NotSolvable),
        }
    }

    pub fn w(&self, time: usize, mode: usize) -> &Mat {
        &self.w[time][mode]
    }

    pub fn t(&self, j: usize, time: usize, mode: usize) -> &Mat {
        &self.t[j][time][mode]
    }

    pub fn p(&self, time: usize, mode: usize) -> &Mat {
        &self.p[time][mode]
    }

    pub fn p0(&self, time: usize, mode: usize) -> &Mat {
        &self.p0[time][mode]
    }

    /// `δ^j` at `time`, for `j = 1..d`.
    pub fn delta(&self, j: usize, time: usize, mode: usize) -> &Mat {
        &self.delta[j][time][mode]
    }

    /// `α^g` at `time` for the mode path at times `time-(d-g)+1 ..= time`.
    ///
    /// For `d ≤ 3` the path has at most two entries, i.e. `α^g` is keyed by the
    /// pair (earliest mode, current mode).
    pub fn alpha(&self, g: usize, time: usize, path: &[usize]) -> &Mat {
        debug_assert_eq!(path.len(), self.delay - g);
        &self.alpha[g][time][path_index(path, self.modes)]
    }

    pub(crate) fn alpha_entries(&self, g: usize, time: usize) -> &[Mat] {
        &self.alpha[g][time]
    }

    /// `W⁻¹ · rhs` at a decision time, through the stored factorization.
    pub fn w_solve(&self, time: usize, mode: usize, rhs: &Mat) -> Result<Mat> {
        match &self.w_factor[time][mode] {
            Some(f) => Ok(f.solve(rhs)),
            None => Err(Error::NotSolvable),
        }
    }
}

fn zeros_grid(times: usize, modes: usize, rows: usize, cols: usize) -> Vec<Vec<Mat>> {
    vec![vec![Mat::zeros(rows, cols); modes]; times]
}

/// Runs the backward sweep `k = N, …, 1`.
///
/// Each iteration produces `W`, `T^j` at `k-d` (when `k ≥ d`), then `P`, `P⁰`,
/// `δ^j`, `α` at `k-1`. Halts at the first `W` that is not positive definite;
/// the tables computed so far are retained.
pub fn solve_riccati(model: &JumpLinearModel) -> RiccatiTables {
    let (n, m, modes, d, horizon) = (model.n, model.m, model.modes, model.delay, model.horizon);
    let times = horizon + 1;
    let last = horizon - d;

    let mut w = zeros_grid(times, modes, m, m);
    let mut w_factor: Vec<Vec<Option<SpdFactor>>> = vec![vec![None; modes]; times];
    let ident = Mat::identity(m, m);
    let ident_factor = SpdFactor::new(&ident);
    for tt in last + 1..times {
        for l in 0..modes {
            w[tt][l] = ident.clone();
            w_factor[tt][l] = ident_factor.clone();
        }
    }

    let mut t_tab: Vec<Vec<Vec<Mat>>> = (0..d)
        .map(|j| zeros_grid(times, modes, m, if j == 0 { n } else { m }))
        .collect();
    let mut p = zeros_grid(times, modes, n, n);
    let mut p0 = zeros_grid(times, modes, n, n);
    let mut delta: Vec<Vec<Vec<Mat>>> = (0..d)
        .map(|j| if j == 0 { Vec::new() } else { zeros_grid(times, modes, m, n) })
        .collect();
    let mut alpha: Vec<Vec<Vec<Mat>>> = (0..d)
        .map(|g| {
            if g == 0 {
                Vec::new()
            } else {
                vec![vec![Mat::zeros(m, n); modes.pow((d - g) as u32)]; times]
            }
        })
        .collect();

    let mut max_asym = 0.0_f64;
    let mut solvability = Solvability::Solvable;

    // Terminal seeds: P(N) = Λ_1 P_term; P⁰, T, δ, α vanish at N.
    for l in 0..modes {
        let mut acc = Mat::zeros(n, n);
        for l2 in 0..modes {
            acc += &model.p_term[l2] * model.transition(l, l2);
        }
        p[horizon][l] = acc;
    }

    let pm = |p: &Vec<Vec<Mat>>, p0: &Vec<Vec<Mat>>, time: usize, l: usize| &p[time][l] - &p0[time][l];

    'sweep: for k in (1..=horizon).rev() {
        if k >= d {
            let tt = k - d;
            for l in 0..modes {
                let full = enumerate_paths(model, l, d).expect("valid mode");
                let mut w_acc = Mat::zeros(m, m);
                let mut t_acc: Vec<Mat> = (0..d).map(|j| Mat::zeros(m, if j == 0 { n } else { m })).collect();
                for path in &full {
                    let e = path.last();
                    let bt_pm = model.b[e].transpose() * pm(&p, &p0, k, e);
                    w_acc += (&bt_pm * &model.b[e] + &model.r[e]) * path.weight;
                    t_acc[0] += &bt_pm * f_product(model, &path.modes).unwrap() * path.weight;
                    for (j, acc) in t_acc.iter_mut().enumerate().skip(1) {
                        let f = f_product(model, &path.modes[j..]).unwrap();
                        *acc += &bt_pm * f * &model.b[path.modes[j - 1]] * path.weight;
                    }
                }
                // Corrections from the decisions at t+1 .. t+d-1, which depend on u(t).
                for s in 1..d {
                    let later = k - s;
                    for path in enumerate_paths(model, l, d - s).expect("valid mode") {
                        let e = path.last();
                        let ts = &t_tab[s][later][e];
                        let gain = ts.transpose() * w_factor[later][e].as_ref().expect("factored").solve(&Mat::identity(m, m));
                        let wt = path.weight;
                        w_acc -= &gain * ts * wt;
                        let g_t0 = &gain * &t_tab[0][later][e];
                        t_acc[0] -= &g_t0 * f_product(model, &path.modes).unwrap() * wt;
                        for (j, acc) in t_acc.iter_mut().enumerate().skip(1) {
                            if s <= d - j {
                                let f = f_product(model, &path.modes[j..]).unwrap();
                                *acc -= &g_t0 * f * &model.b[path.modes[j - 1]] * wt;
                            } else {
                                *acc -= &gain * &t_tab[s - (d - j)][later][e] * wt;
                            }
                        }
                    }
                }
                max_asym = max_asym.max(asymmetry(&w_acc));
                let w_sym = symmetrize(&w_acc);
                let factor = SpdFactor::new(&w_sym);
                w[tt][l] = w_sym;
                for (j, acc) in t_acc.into_iter().enumerate() {
                    t_tab[j][tt][l] = acc;
                }
                match factor {
                    Some(f) => w_factor[tt][l] = Some(f),
                    None => {
                        solvability = Solvability::NotPositiveDefinite { time: tt, mode: l };
                        break 'sweep;
                    }
                }
            }
        }

        let tau = k - 1;
        for l in 0..modes {
            let mut acc = Mat::zeros(n, n);
            for l2 in 0..modes {
                let a = &model.a[l2];
                acc += (&model.q[l2] + a.transpose() * pm(&p, &p0, k, l2) * a) * model.transition(l, l2);
            }
            max_asym = max_asym.max(asymmetry(&acc));
            p[tau][l] = symmetrize(&acc);
            if tau <= last {
                let t0 = &t_tab[0][tau][l];
                let raw = t0.transpose() * w_factor[tau][l].as_ref().expect("factored").solve(t0);
                max_asym = max_asym.max(asymmetry(&raw));
                p0[tau][l] = symmetrize(&raw);
            }
        }

        if d >= 2 {
            for l in 0..modes {
                let winv = |j: usize| -> Mat {
                    t_tab[j][tau][l].transpose() * w_factor[tau][l].as_ref().expect("factored").solve(&t_tab[0][tau][l])
                };
                let mut acc = Mat::zeros(m, n);
                for l2 in 0..modes {
                    acc += model.b[l2].transpose() * pm(&p, &p0, k, l2) * &model.a[l2] * model.transition(l, l2);
                }
                delta[1][tau][l] = acc - winv(1);
                for j in 2..d {
                    let mut acc = Mat::zeros(m, n);
                    for l2 in 0..modes {
                        acc += &delta[j - 1][k][l2] * &model.a[l2] * model.transition(l, l2);
                    }
                    delta[j][tau][l] = acc - winv(j);
                }
            }
            for l in 0..modes {
                alpha[d - 1][tau][l] = delta[d - 1][tau][l].clone();
            }
            for j in 2..d {
                if tau + 1 < j {
                    continue;
                }
                let g = d - j;
                for idx in 0..modes.pow(j as u32) {
                    let path = path_from_index(idx, j, modes);
                    let now = path[j - 1];
                    let mut val = delta[g][tau][now].clone();
                    for s in 1..j {
                        let earlier = tau - s;
                        let le = path[j - 1 - s];
                        let suffix = path_index(&path[j - s..], modes);
                        let t_js = &t_tab[d - j + s][earlier][le];
                        let a_s = &alpha[d - s][tau][suffix];
                        let solved = w_factor[earlier][le].as_ref().expect("factored").solve(a_s);
                        val -= t_js.transpose() * solved;
                    }
                    alpha[g][tau][idx] = val;
                }
            }
        }
    }

    RiccatiTables {
        n,
        m,
        modes,
        delay: d,
        horizon,
        w,
        w_factor,
        t: t_tab,
        p,
        p0,
        delta,
        alpha,
        solvability,
        max_asymmetry: max_asym,
    }
}
