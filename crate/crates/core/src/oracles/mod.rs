//! Independent solvers and baselines used to check the closed form, plus the
//! comparison metrics (savings, lifetime, bandwidth).

mod bisection;
mod descent;
mod grid;
mod metrics;
mod uniform;

pub use bisection::solve_l1_bisection;
pub use descent::{project_onto_capped_simplex, projected_descent};
pub use grid::grid_search;
pub use metrics::{
    average_node_lifetime, bandwidth_requirement, relative_power_savings, Lifetime, MultipleAccess,
};
pub use uniform::solve_uniform;

use crate::model::Allocation;
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Bisection,
    ProjectedDescent,
    Grid,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<T> {
    pub allocation: Allocation<T>,
    pub iterations: usize,
    /// Largest of `|D0 sum r_k - 1|` and any box violation, relative to the
    /// box width.
    pub max_abs_constraint_violation: T,
    pub method: OracleMethod,
}

pub(crate) fn constraint_violation<T: Scalar>(r: &[T], caps: &[T], d0: T) -> T {
    let sum = compensated_sum(r.iter().copied());
    let mut worst = (sum * d0 - T::one()).abs();
    for (&x, &cap) in r.iter().zip(caps) {
        let below = (-x).max(T::zero()) / cap;
        let above = (x - cap).max(T::zero()) / cap;
        worst = worst.max(below).max(above);
    }
    worst
}
