use super::{constraint_violation, OracleMethod, OracleReport};
use crate::error::Result;
use crate::model::{analytic_mse, Allocation, ProblemSpec};
use crate::scalar::Scalar;

/// Smallest common gain `alpha` (same for every sensor) meeting `D0`.
///
/// Distortion is strictly decreasing in the common gain, so the gain is
/// bracketed by doubling/halving and then bisected to adjacent floats; the
/// feasible end of the bracket is returned.
pub fn solve_uniform<T: Scalar>(prob: &ProblemSpec<T>) -> Result<OracleReport<T>> {
    prob.ensure_feasible()?;
    let net = &prob.network;
    let k = net.len();
    let distortion = |a: T| analytic_mse(&vec![a; k], net);

    let two = T::lit(2.0);
    let mut iterations = 0;
    let mut hi = T::one();
    let mut lo;
    if distortion(hi)? <= prob.d0 {
        lo = hi / two;
        while distortion(lo)? <= prob.d0 {
            hi = lo;
            lo = lo / two;
            iterations += 1;
        }
    } else {
        lo = hi;
        hi = hi * two;
        while distortion(hi)? > prob.d0 {
            lo = hi;
            hi = hi * two;
            iterations += 1;
        }
    }
    loop {
        iterations += 1;
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi || iterations > 10_000 {
            break;
        }
        if distortion(mid)? <= prob.d0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let alpha = vec![hi; k];
    let allocation = Allocation::from_gains(net, alpha, prob.norm, T::nan())?;
    let caps: Vec<T> = net.sensors().iter().map(|s| s.max_precision()).collect();
    let violation = constraint_violation(&allocation.r, &caps, prob.d0);
    Ok(OracleReport {
        allocation,
        iterations,
        max_abs_constraint_violation: violation,
        method: OracleMethod::Uniform,
    })
}
