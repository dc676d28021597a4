//! Minimum L2-norm power allocation.
//!
//! Solves
//!
//! ```text
//! min  sum_k (W^2 xi2_k / g_k)^2 (r_k / (1 - sigma2_k r_k))^2
//! s.t. sum_k r_k >= 1/D0,   0 <= r_k < 1/sigma2_k
//! ```
//!
//! The objective is increasing in every `r_k`, so the distortion constraint
//! binds and is kept as an equality. The box is handled with a logarithmic
//! barrier; each centering step is a Newton step on the barrier problem
//! restricted to `sum r = 1/D0`. Once the duality gap is small the barrier is
//! dropped and Newton steps on the bare objective finish the solve.

use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, Norm, ProblemSpec};
use crate::objective::{self, Term};
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2SolverOptions<T> {
    /// Bound on [`kkt_residual_l2`] at the returned point.
    pub kkt_tolerance: T,
    /// Newton steps allowed across all phases.
    pub max_iterations: usize,
    /// Factor applied to the barrier weight `1/t` after each centering.
    pub barrier_decrease: T,
    /// Steps stop short of the box boundary by this fraction of the distance.
    pub boundary_margin: T,
}

impl<T: Scalar> Default for L2SolverOptions<T> {
    fn default() -> Self {
        Self {
            kkt_tolerance: T::lit(1e-9),
            max_iterations: 200,
            barrier_decrease: T::lit(0.1),
            boundary_margin: T::lit(0.05),
        }
    }
}

impl<T: Scalar> L2SolverOptions<T> {
    fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > T::zero()) {
            return Err(invalid("kkt_tolerance must be positive"));
        }
        if !(self.barrier_decrease > T::zero() && self.barrier_decrease < T::one()) {
            return Err(invalid("barrier_decrease must lie in (0, 1)"));
        }
        if !(self.boundary_margin > T::zero() && self.boundary_margin < T::one()) {
            return Err(invalid("boundary_margin must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Solver output with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Solution<T> {
    pub allocation: Allocation<T>,
    pub iterations: usize,
    pub kkt_residual: T,
    /// Smallest objective curvature seen at any iterate.
    pub min_curvature: T,
    /// Precision vector after every Newton step.
    pub iterates: Vec<Vec<T>>,
}

pub fn solve_l2<T: Scalar>(prob: &ProblemSpec<T>, opts: &L2SolverOptions<T>) -> Result<Allocation<T>> {
    run(prob, opts, false).map(|s| s.allocation)
}

/// [`solve_l2`] keeping every iterate.
pub fn solve_l2_traced<T: Scalar>(prob: &ProblemSpec<T>, opts: &L2SolverOptions<T>) -> Result<L2Solution<T>> {
    run(prob, opts, true)
}

/// Stationarity plus primal residual of the L2 program at an interior point.
///
/// With `mu = (max_k d_k + min_k d_k)/2`, `d_k` the objective derivatives,
/// returns `max_k |d_k - mu| / mu + |sum r - 1/D0| D0`.
pub fn kkt_residual_l2<T: Scalar>(r: &[T], prob: &ProblemSpec<T>) -> Result<T> {
    prob.network.check_dim(r.len())?;
    for (k, (s, &x)) in prob.network.sensors().iter().zip(r).enumerate() {
        if !(x > T::zero() && x < s.max_precision()) {
            return Err(invalid(format!("r[{k}] = {x} is not inside (0, 1/sigma2)")));
        }
    }
    let terms = objective::terms(prob);
    let mask = vec![true; r.len()];
    Ok(residual(&terms, r, &mask, prob.target_precision()))
}

fn residual<T: Scalar>(terms: &[Term<T>], r: &[T], active: &[bool], target: T) -> T {
    let mut hi = T::neg_infinity();
    let mut lo = T::infinity();
    for ((t, &x), &on) in terms.iter().zip(r).zip(active) {
        if on {
            let d = t.derivative(Norm::L2, x);
            hi = hi.max(d);
            lo = lo.min(d);
        }
    }
    let stationarity = if hi > T::zero() { (hi - lo) / (hi + lo) } else { T::zero() };
    let primal = (compensated_sum(r.iter().copied()) - target).abs() / target;
    stationarity + primal
}

fn multiplier<T: Scalar>(terms: &[Term<T>], r: &[T], active: &[bool]) -> T {
    let mut hi = T::neg_infinity();
    let mut lo = T::infinity();
    for ((t, &x), &on) in terms.iter().zip(r).zip(active) {
        if on {
            let d = t.derivative(Norm::L2, x);
            hi = hi.max(d);
            lo = lo.min(d);
        }
    }
    (hi + lo) / T::lit(2.0)
}

/// Equality-constrained Newton direction for a separable objective with
/// gradient `g` and diagonal Hessian `h`, restoring `sum r = target`.
fn newton_direction<T: Scalar>(g: &[T], h: &[T], r: &[T], target: T) -> Vec<T> {
    let excess = target - compensated_sum(r.iter().copied());
    let ratio = compensated_sum(g.iter().zip(h).map(|(&gk, &hk)| gk / hk));
    let inv = compensated_sum(h.iter().map(|&hk| hk.recip()));
    let nu = (excess + ratio) / inv;
    g.iter().zip(h).map(|(&gk, &hk)| -(gk - nu) / hk).collect()
}

/// Moves `r` onto `sum r = target` along `1/h`, the feasibility part of the
/// Newton step, so the remaining direction is a descent direction.
fn restore_total<T: Scalar>(r: &mut [T], h: &[T], caps: &[T], target: T) {
    let excess = target - compensated_sum(r.iter().copied());
    let inv = compensated_sum(h.iter().map(|&hk| hk.recip()));
    for ((x, &hk), &cap) in r.iter_mut().zip(h).zip(caps) {
        let moved = *x + excess / (hk * inv);
        if moved > T::zero() && moved < cap {
            *x = moved;
        }
    }
}

/// Largest step in `(0, 1]` keeping `0 < r + s d < caps` with the margin.
fn max_step<T: Scalar>(r: &[T], d: &[T], caps: &[T], margin: T) -> T {
    let mut step = T::infinity();
    for ((&x, &dx), &cap) in r.iter().zip(d).zip(caps) {
        if dx < T::zero() {
            step = step.min(x / -dx);
        } else if dx > T::zero() {
            step = step.min((cap - x) / dx);
        }
    }
    T::one().min((T::one() - margin) * step)
}

struct Workspace<'a, T> {
    terms: &'a [Term<T>],
    caps: &'a [T],
    scale: T,
}

impl<T: Scalar> Workspace<'_, T> {
    fn objective(&self, r: &[T]) -> T {
        objective::total(self.terms, Norm::L2, r) / self.scale
    }

    /// `t F(r)/scale - sum log r - sum log(cap - r)`.
    fn barrier(&self, t: T, r: &[T]) -> T {
        let logs = compensated_sum(
            r.iter()
                .zip(self.caps)
                .map(|(&x, &c)| x.ln() + (c - x).ln()),
        );
        t * self.objective(r) - logs
    }

    fn derivatives(&self, t: Option<T>, r: &[T]) -> (Vec<T>, Vec<T>) {
        self.terms
            .iter()
            .zip(r)
            .zip(self.caps)
            .map(|((term, &x), &c)| {
                let g = term.derivative(Norm::L2, x) / self.scale;
                let h = term.curvature(Norm::L2, x) / self.scale;
                match t {
                    Some(t) => {
                        let lo = x.recip();
                        let up = (c - x).recip();
                        (t * g - lo + up, t * h + lo * lo + up * up)
                    }
                    None => (g, h),
                }
            })
            .unzip()
    }
}

fn run<T: Scalar>(prob: &ProblemSpec<T>, opts: &L2SolverOptions<T>, record: bool) -> Result<L2Solution<T>> {
    if prob.norm != Norm::L2 {
        return Err(invalid("solve_l2 called on an L1 problem"));
    }
    opts.validate()?;
    prob.ensure_feasible()?;
    let net = &prob.network;
    let k = net.len();
    let target = prob.target_precision();
    let caps: Vec<T> = net.sensors().iter().map(|s| s.max_precision()).collect();
    let total = net.total_precision();
    let terms = objective::terms(prob);

    // proportional-to-precision start: strictly feasible whenever D0 > floor
    let mut r: Vec<T> = caps.iter().map(|&c| c * target / total).collect();
    let scale = objective::total(&terms, Norm::L2, &r);
    let ws = Workspace {
        terms: &terms,
        caps: &caps,
        scale,
    };

    let mut iterations = 0usize;
    let mut iterates = Vec::new();
    let mut min_curvature = T::infinity();
    let mut note = |r: &[T], its: &mut usize, iterates: &mut Vec<Vec<T>>| {
        *its += 1;
        for (term, &x) in terms.iter().zip(r) {
            min_curvature = min_curvature.min(term.curvature(Norm::L2, x));
        }
        if record {
            iterates.push(r.to_vec());
        }
    };
    let budget_error = |its: usize, r: &[T]| Error::Convergence {
        method: "L2 interior point",
        iterations: its,
        residual: residual(&terms, r, &vec![true; r.len()], target).as_f64(),
    };

    // barrier phase
    let constraints = T::from_usize_lossy(2 * k);
    let mut t = T::one();
    // the optimum is interior, so Newton on the bare objective finishes from here
    let gap_goal = T::lit(1e-6);
    loop {
        let mut previous = T::infinity();
        loop {
            let (g, h) = ws.derivatives(Some(t), &r);
            restore_total(&mut r, &h, &caps, target);
            let d = newton_direction(&g, &h, &r, target);
            let decrement = compensated_sum(d.iter().zip(&h).map(|(&dk, &hk)| hk * dk * dk));
            // a decrement that stops falling is rounding noise in the gradient
            if decrement / T::lit(2.0) <= T::lit(1e-10) || decrement >= previous {
                break;
            }
            previous = decrement;
            if iterations >= opts.max_iterations {
                return Err(budget_error(iterations, &r));
            }
            let slope = compensated_sum(g.iter().zip(&d).map(|(&gk, &dk)| gk * dk));
            let f0 = ws.barrier(t, &r);
            let mut step = max_step(&r, &d, &caps, opts.boundary_margin);
            let mut accepted = None;
            for _ in 0..60 {
                let next: Vec<T> = r.iter().zip(&d).map(|(&x, &dx)| x + step * dx).collect();
                let f1 = ws.barrier(t, &next);
                if f1 < f0 && f1 <= f0 + T::lit(1e-4) * step * slope {
                    accepted = Some(next);
                    break;
                }
                step = step * T::lit(0.5);
            }
            match accepted {
                Some(next) => r = next,
                // centered as far as rounding in the barrier value allows
                None => break,
            }
            note(&r, &mut iterations, &mut iterates);
        }
        if constraints / t <= gap_goal {
            break;
        }
        t = t / opts.barrier_decrease;
    }

    // polish: Newton on the bare objective, still strictly inside the box
    let mut active = vec![true; k];
    loop {
        let res = residual(&terms, &r, &active, target);
        if res <= opts.kkt_tolerance {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(budget_error(iterations, &r));
        }
        let (g, h) = ws.derivatives(None, &r);
        restore_total(&mut r, &h, &caps, target);
        let d = newton_direction(&g, &h, &r, target);
        let slope = compensated_sum(g.iter().zip(&d).map(|(&gk, &dk)| gk * dk));
        let f0 = ws.objective(&r);
        let mut step = max_step(&r, &d, &caps, opts.boundary_margin);
        let mut accepted = None;
        for _ in 0..60 {
            let next: Vec<T> = r.iter().zip(&d).map(|(&x, &dx)| x + step * dx).collect();
            let f1 = ws.objective(&next);
            if f1 <= f0 + T::lit(1e-4) * step * slope || (f1 - f0).abs() <= T::lit(1e-14) * f0 {
                accepted = Some(next);
                break;
            }
            step = step * T::lit(0.5);
        }
        r = accepted.ok_or_else(|| budget_error(iterations, &r))?;
        note(&r, &mut iterations, &mut iterates);
        // negligible coordinates no longer constrain the stationarity test
        for ((on, &x), &cap) in active.iter_mut().zip(&r).zip(&caps) {
            *on = x >= T::lit(1e-14) * cap;
        }
    }

    let kkt = residual(&terms, &r, &active, target);
    let lambda = multiplier(&terms, &r, &active);
    for ((x, &cap), &on) in r.iter_mut().zip(&caps).zip(&active) {
        if !on || *x < T::lit(1e-14) * cap {
            *x = T::zero();
        }
    }
    let allocation = Allocation::from_precisions(net, r, Norm::L2, lambda)?;
    Ok(L2Solution {
        allocation,
        iterations,
        kkt_residual: kkt,
        min_curvature,
        iterates,
    })
}
