use super::{constraint_violation, OracleMethod, OracleReport};
use crate::error::Result;
use crate::model::{Allocation, NetworkInstance, Norm, ProblemSpec};
use crate::scalar::{compensated_sum, Scalar};

/// `sum_k (1/sigma2_k) (1 - W c_k / sqrt(lambda))^+`.
fn precisions_at<T: Scalar>(net: &NetworkInstance<T>, lambda: T) -> Vec<T> {
    let level = lambda.sqrt() / net.w();
    net.sensors()
        .iter()
        .map(|s| (T::one() - s.channel_scale() / level).max(T::zero()) / s.sigma2)
        .collect()
}

/// Bisection on the distortion multiplier `lambda0`.
///
/// Total precision is nondecreasing in `lambda0`, zero at `0+`, and every clamp
/// is inactive at
/// `lambda_max = (W max_k c_k S / (S - 1/D0))^2` with `S = sum 1/sigma2`.
/// Stops once `|D0 sum r - 1| <= tol` or the bracket reaches adjacent floats.
pub fn solve_l1_bisection<T: Scalar>(prob: &ProblemSpec<T>, tol: T) -> Result<OracleReport<T>> {
    prob.ensure_feasible()?;
    let net = &prob.network;
    let total = net.total_precision();
    let target = prob.target_precision();
    let worst_scale = net
        .sensors()
        .iter()
        .map(|s| s.channel_scale())
        .fold(T::zero(), T::max);
    let mut hi = (net.w() * worst_scale * total / (total - target)).powi(2);
    let mut lo = T::zero();
    let gap = |lambda: T| compensated_sum(precisions_at(net, lambda)) * prob.d0 - T::one();

    let mut iterations = 0;
    let lambda;
    loop {
        iterations += 1;
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi || iterations > 10_000 {
            lambda = hi;
            break;
        }
        let g = gap(mid);
        if g.abs() <= tol {
            lambda = mid;
            break;
        }
        if g < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let r = precisions_at(net, lambda);
    let caps: Vec<T> = net.sensors().iter().map(|s| s.max_precision()).collect();
    let violation = constraint_violation(&r, &caps, prob.d0);
    let allocation = Allocation::from_precisions(net, r, Norm::L1, lambda)?;
    Ok(OracleReport {
        allocation,
        iterations,
        max_abs_constraint_violation: violation,
        method: OracleMethod::Bisection,
    })
}
