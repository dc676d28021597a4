use super::{constraint_violation, OracleMethod, OracleReport};
use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, Norm, ProblemSpec};
use crate::objective::{self, Term};
use crate::scalar::{compensated_sum, Scalar};

/// Relative distance kept from the `1/sigma2` pole.
const POLE_MARGIN: f64 = 1e-9;

/// Projection onto `{sum p = total, 0 <= p <= caps}` in the metric
/// `sum_k scale_k (p_k - z_k)^2`.
///
/// The minimizer is `p_k = clip(z_k + tau/scale_k, 0, cap_k)`; `tau` is
/// bracketed by bisection and then solved exactly on the free set.
pub fn project_onto_capped_simplex<T: Scalar>(z: &[T], scale: &[T], caps: &[T], total: T) -> Result<Vec<T>> {
    if z.len() != scale.len() || z.len() != caps.len() {
        return Err(invalid("projection inputs differ in length"));
    }
    let cap_sum = compensated_sum(caps.iter().copied());
    if total < T::zero() || total > cap_sum {
        return Err(invalid(format!("total {total} outside [0, {cap_sum}]")));
    }
    let place = |tau: T| -> Vec<T> {
        z.iter()
            .zip(scale)
            .zip(caps)
            .map(|((&zk, &hk), &ck)| (zk + tau / hk).max(T::zero()).min(ck))
            .collect()
    };
    let sum_at = |tau: T| compensated_sum(place(tau));

    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for ((&zk, &hk), &ck) in z.iter().zip(scale).zip(caps) {
        lo = lo.min(-zk * hk);
        hi = hi.max((ck - zk) * hk);
    }
    for _ in 0..2000 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum_at(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Exact multiplier on the set left free by the bracketed tau.
    let mut tau = hi;
    let mut fixed = Vec::new();
    let mut free_z = Vec::new();
    let mut free_inv = Vec::new();
    for ((&zk, &hk), &ck) in z.iter().zip(scale).zip(caps) {
        let v = zk + tau / hk;
        if v <= T::zero() {
            continue;
        } else if v >= ck {
            fixed.push(ck);
        } else {
            free_z.push(zk);
            free_inv.push(hk.recip());
        }
    }
    if !free_z.is_empty() {
        let rest = total - compensated_sum(fixed) - compensated_sum(free_z);
        let exact = rest / compensated_sum(free_inv);
        if exact.is_finite() {
            tau = exact.max(lo).min(hi);
        }
    }
    Ok(place(tau))
}

/// Diagonally scaled projected gradient descent on the precision-space
/// program `min sum term(r_k)` over `{sum r = 1/D0, 0 <= r <= (1-1e-9)/sigma2}`.
///
/// Each step moves to the projection of the separable Newton point
/// `r - grad/curvature` and backtracks (factor 0.5, Armijo 1e-4). Stops when
/// the step is below `tol * (1/D0)` in max norm.
pub fn projected_descent<T: Scalar>(
    prob: &ProblemSpec<T>,
    norm: Norm,
    steps: usize,
    tol: T,
) -> Result<OracleReport<T>> {
    prob.ensure_feasible()?;
    let net = &prob.network;
    let target = prob.target_precision();
    let caps: Vec<T> = net
        .sensors()
        .iter()
        .map(|s| (T::one() - T::lit(POLE_MARGIN)) / s.sigma2)
        .collect();
    if compensated_sum(caps.iter().copied()) <= target {
        return Err(invalid("distortion target too close to the floor for descent"));
    }
    let terms = objective::terms(prob);
    let total = net.total_precision();
    let mut r: Vec<T> = net
        .sensors()
        .iter()
        .map(|s| target / total / s.sigma2)
        .collect();

    let threshold = tol * target;
    let mut iterations = 0;
    let mut last_step = T::infinity();
    let mut converged = false;
    while iterations < steps {
        iterations += 1;
        let (grad, curv) = derivatives(&terms, norm, &r);
        let z: Vec<T> = r
            .iter()
            .zip(&grad)
            .zip(&curv)
            .map(|((&x, &g), &h)| x - g / h)
            .collect();
        let p = project_onto_capped_simplex(&z, &curv, &caps, target)?;
        let dir: Vec<T> = p.iter().zip(&r).map(|(&a, &b)| a - b).collect();
        last_step = dir.iter().fold(T::zero(), |m, d| m.max(d.abs()));
        if last_step <= threshold {
            converged = true;
            break;
        }

        let f0 = objective::total(&terms, norm, &r);
        let slope = compensated_sum(grad.iter().zip(&dir).map(|(&g, &d)| g * d));
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = if t == T::one() {
                p.clone()
            } else {
                r.iter().zip(&dir).map(|(&x, &d)| x + t * d).collect()
            };
            let f1 = objective::total(&terms, norm, &trial);
            let flat = (f1 - f0).abs() <= T::lit(8.0) * T::epsilon() * f0.abs();
            if f1 <= f0 + T::lit(1e-4) * t * slope || flat {
                accepted = Some(trial);
                break;
            }
            t = t * T::lit(0.5);
        }
        match accepted {
            Some(next) => r = next,
            None => {
                // no representable decrease left along the Newton direction
                converged = last_step <= threshold * T::lit(1e4);
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Convergence {
            method: "projected descent",
            iterations,
            residual: (last_step / target).as_f64(),
        });
    }

    let violation = constraint_violation(&r, &caps, prob.d0);
    let lambda = objective_multiplier(&terms, norm, &r);
    let allocation = Allocation::from_precisions(net, r, norm, lambda)?;
    Ok(OracleReport {
        allocation,
        iterations,
        max_abs_constraint_violation: violation,
        method: OracleMethod::ProjectedDescent,
    })
}

fn derivatives<T: Scalar>(terms: &[Term<T>], norm: Norm, r: &[T]) -> (Vec<T>, Vec<T>) {
    terms
        .iter()
        .zip(r)
        .map(|(t, &x)| (t.derivative(norm, x), t.curvature(norm, x)))
        .unzip()
}

/// Largest marginal cost among coordinates with positive precision.
fn objective_multiplier<T: Scalar>(terms: &[Term<T>], norm: Norm, r: &[T]) -> T {
    terms
        .iter()
        .zip(r)
        .filter(|(_, &x)| x > T::zero())
        .map(|(t, &x)| t.derivative(norm, x))
        .fold(T::zero(), T::max)
}
