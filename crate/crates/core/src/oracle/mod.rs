//! Independent references for the Riccati solution: the exact policy-tree QP,
//! definitional costates, augmented-state LQR and the delay-free recursion.

mod augmented;
mod costate;
mod delay_free;
mod qp;

pub use augmented::{augmented_lqr, equivalent_augmented_gain, AugmentedLqr};
pub use costate::{
    definitional_costate, definitional_costates_all, stationarity_residual, CostateTable, StationarityReport,
};
pub use delay_free::{standard_coupled_riccati, DelayFreeSolution, FrozenModePredictor};
pub use qp::{
    build_qp, fixed_first_decision_cost, is_positive_definite, solve_qp, PolicyTree, QpSolution, QuadraticCost,
    TreeLayout, QP_MAX_VARS,
};
pub(crate) use qp::check_budget;
