use super::RiccatiTables;
use crate::linalg::{rel_diff, Mat};
use crate::model::{enumerate_paths, path_from_index, path_index, JumpLinearModel};

/// Maximum residual of the four conditional-expectation identities linking α to T:
///
/// ```text
/// E{A' α^{d-1}' | k-1}        = T^0(k-1)'
/// E{A' α^{d-j}' | k-1}        = α^{d-j+1}(k-1)'   j = 2..d-1
/// E{B' α^{d-1}' | k-1}        = T^1(k-1)'
/// E{B' α^{d-j}' | k-j}        = T^j(k-j)'         j = 2..d-1
/// ```
///
/// Residuals are relative to `max(1, |lhs|, |rhs|)`. Zero when `d = 1`.
pub fn check_table_identities(model: &JumpLinearModel, tables: &RiccatiTables) -> f64 {
    let d = model.delay;
    let modes = model.modes;
    let mut worst = 0.0_f64;
    if d < 2 {
        return worst;
    }
    let mut record = |lhs: &Mat, rhs: &Mat| worst = worst.max(rel_diff(lhs, rhs, 1.0));

    for k in 1..=model.horizon {
        let prev = k - 1;
        for l in 0..modes {
            let mut via_a = Mat::zeros(model.n, model.m);
            let mut via_b = Mat::zeros(model.m, model.m);
            for l2 in 0..modes {
                let alpha = tables.alpha(d - 1, k, &[l2]).transpose();
                let wt = model.transition(l, l2);
                via_a += model.a[l2].transpose() * &alpha * wt;
                via_b += model.b[l2].transpose() * &alpha * wt;
            }
            record(&via_a, &tables.t(0, prev, l).transpose());
            record(&via_b, &tables.t(1, prev, l).transpose());
        }

        for j in 2..d {
            // One-step identity against α^{d-j+1}(k-1), keyed by modes k-j+1 ..= k-1.
            if k + 1 >= j {
                for idx in 0..modes.pow(j as u32 - 1) {
                    let past = path_from_index(idx, j - 1, modes);
                    let now = past[j - 2];
                    let mut lhs = Mat::zeros(model.n, model.m);
                    let mut full = past.clone();
                    full.push(0);
                    for l2 in 0..modes {
                        full[j - 1] = l2;
                        let alpha = &tables.alpha_entries(d - j, k)[path_index(&full, modes)];
                        lhs += model.a[l2].transpose() * alpha.transpose() * model.transition(now, l2);
                    }
                    let rhs = tables.alpha(d - j + 1, prev, &past).transpose();
                    record(&lhs, &rhs);
                }
            }
            // j-step identity against T^j(k-j).
            if k >= j {
                for l in 0..modes {
                    let mut lhs = Mat::zeros(model.m, model.m);
                    for path in enumerate_paths(model, l, j).expect("valid mode") {
                        let alpha = tables.alpha(d - j, k, &path.modes);
                        lhs += model.b[path.last()].transpose() * alpha.transpose() * path.weight;
                    }
                    record(&lhs, &tables.t(j, k - j, l).transpose());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_mode_example;
    use crate::riccati::solve_riccati;

    #[test]
    fn two_mode_model_identities_hold() {
        let p = two_mode_example();
        let tab = solve_riccati(&p.model);
        let res = check_table_identities(&p.model, &tab);
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn delay_one_is_vacuous() {
        let mut p = two_mode_example();
        p.model.delay = 1;
        let tab = solve_riccati(&p.model);
        assert_eq!(check_table_identities(&p.model, &tab), 0.0);
    }
}
