use super::{constraint_violation, OracleMethod, OracleReport};
use crate::error::{invalid, Result};
use crate::model::{Allocation, Norm, ProblemSpec};
use crate::objective;
use crate::scalar::Scalar;

const MAX_EVALUATIONS: f64 = 5.0e8;

/// Exhaustive search on the equality slice `sum r = 1/D0` for `K <= 3`.
///
/// The first `K-1` precisions run over a grid of spacing `step` inside their
/// boxes; the last one takes up the remainder and must land strictly inside
/// its own box.
pub fn grid_search<T: Scalar>(prob: &ProblemSpec<T>, norm: Norm, step: T) -> Result<OracleReport<T>> {
    prob.ensure_feasible()?;
    let net = &prob.network;
    let k = net.len();
    if k > 3 {
        return Err(invalid(format!("grid oracle supports K <= 3, got {k}")));
    }
    if !(step > T::zero()) {
        return Err(invalid("grid step must be positive"));
    }
    let caps: Vec<T> = net.sensors().iter().map(|s| s.max_precision()).collect();
    let target = prob.target_precision();
    let terms = objective::terms(prob);

    let axis = |cap: T| -> usize {
        (cap / step).ceil().to_usize().unwrap_or(usize::MAX)
    };
    let cells: f64 = caps[..k - 1].iter().map(|&c| axis(c) as f64).product();
    if cells > MAX_EVALUATIONS {
        return Err(invalid(format!("grid of {cells:e} points is too large")));
    }

    let mut best: Option<(T, Vec<T>)> = None;
    let mut evaluations = 0usize;
    let mut consider = |r: Vec<T>| {
        let last = *r.last().expect("nonempty");
        if !(last >= T::zero() && last < caps[k - 1]) {
            return;
        }
        let v = objective::total(&terms, norm, &r);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, r));
        }
    };
    match k {
        1 => {
            evaluations += 1;
            consider(vec![target]);
        }
        2 => {
            for i in 0..axis(caps[0]) {
                let r0 = step * T::from_usize_lossy(i);
                if r0 > target {
                    break;
                }
                evaluations += 1;
                consider(vec![r0, target - r0]);
            }
        }
        _ => {
            for i in 0..axis(caps[0]) {
                let r0 = step * T::from_usize_lossy(i);
                if r0 > target {
                    break;
                }
                for j in 0..axis(caps[1]) {
                    let r1 = step * T::from_usize_lossy(j);
                    if r0 + r1 > target {
                        break;
                    }
                    evaluations += 1;
                    consider(vec![r0, r1, target - r0 - r1]);
                }
            }
        }
    }
    let (_, r) = best.ok_or_else(|| invalid("no grid point is feasible; refine the step"))?;
    let violation = constraint_violation(&r, &caps, prob.d0);
    let allocation = Allocation::from_precisions(net, r, norm, T::nan())?;
    Ok(OracleReport {
        allocation,
        iterations: evaluations,
        max_abs_constraint_violation: violation,
        method: OracleMethod::Grid,
    })
}
