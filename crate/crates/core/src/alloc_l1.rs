//! Closed-form minimum total power allocation.
//!
//! Sensors are ranked by `c_k = sqrt(xi2_k / g_k)` (best channel first). With
//!
//! ```text
//! A(M) = sum_{m<=M} c_m / sigma2_m
//! B(M) = sum_{m<=M} 1 / sigma2_m - 1/D0
//! f(M) = c_M B(M) / A(M)
//! ```
//!
//! the active count `K1` is the last `M` with `f(M) < 1`, i.e. the last rank
//! whose channel scale lies below the water level `A(M)/B(M)`. `f` is
//! dimensionless and nonpositive while the prefix alone cannot reach `1/D0`. With
//! `eta0 = A(K1)/B(K1)` the optimal precisions and gains are
//!
//! ```text
//! r_k     = (1/sigma2_k) (1 - c_k/eta0)^+
//! alpha_k = c_k (eta0 - c_k) / sigma2_k        for ranked k <= K1, else 0
//! ```
//!
//! and the distortion multiplier is `lambda0 = (W eta0)^2`.

use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, NetworkInstance, Norm, ProblemSpec};
use crate::oracles;
use crate::scalar::{compensated_sum, Scalar};

/// Sensors in nondecreasing order of `xi2/g`.
#[derive(Debug, Clone)]
pub struct RankedNetwork<'a, T> {
    network: &'a NetworkInstance<T>,
    order: Vec<usize>,
    ratios: Vec<T>,
}

impl<'a, T: Scalar> RankedNetwork<'a, T> {
    pub fn network(&self) -> &'a NetworkInstance<T> {
        self.network
    }

    /// `order()[rank] = original sensor index`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `xi2/g` along rank order.
    pub fn ratios(&self) -> &[T] {
        &self.ratios
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Stable sort of the sensors by `xi2/g`; ties keep original index order.
pub fn rank_by_channel<T: Scalar>(net: &NetworkInstance<T>) -> RankedNetwork<'_, T> {
    let sensors = net.sensors();
    let mut order: Vec<usize> = (0..sensors.len()).collect();
    order.sort_by(|&a, &b| {
        sensors[a]
            .noise_to_gain()
            .partial_cmp(&sensors[b].noise_to_gain())
            .expect("validated sensors have finite ratios")
    });
    let ratios = order.iter().map(|&k| sensors[k].noise_to_gain()).collect();
    RankedNetwork {
        network: net,
        order,
        ratios,
    }
}

/// Partial sums and threshold values along the rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState<T> {
    /// `A(M)` for `M = 1..=K` (index `M-1`).
    pub a: Vec<T>,
    /// `B(M)` for `M = 1..=K`.
    pub b: Vec<T>,
    /// `f(M)` for `M = 1..=K`; nonpositive where `B(M) <= 0`.
    pub f: Vec<T>,
    pub active_count: usize,
    pub eta0: T,
    pub lambda0: T,
}

impl<T: Scalar> ThresholdState<T> {
    /// Whether `B(K1) > 0`, i.e. the selected prefix can meet the target.
    pub fn prefix_feasible(&self) -> bool {
        self.b[self.active_count - 1] > T::zero()
    }
}

fn partial_sums<T: Scalar>(ranked: &RankedNetwork<'_, T>, d0: T) -> (Vec<T>, Vec<T>) {
    let sensors = ranked.network.sensors();
    let target = d0.recip();
    let mut a_terms = Vec::with_capacity(ranked.len());
    let mut p_terms = Vec::with_capacity(ranked.len() + 1);
    p_terms.push(-target);
    let mut a = Vec::with_capacity(ranked.len());
    let mut b = Vec::with_capacity(ranked.len());
    for &k in &ranked.order {
        let s = &sensors[k];
        a_terms.push(s.channel_scale() / s.sigma2);
        p_terms.push(s.max_precision());
        a.push(compensated_sum(a_terms.iter().copied()));
        b.push(compensated_sum(p_terms.iter().copied()));
    }
    (a, b)
}

fn f_value<T: Scalar>(scale: T, a: T, b: T) -> T {
    scale * b / a
}

/// `f(M)` for `1 <= M <= K`. Nonpositive (so below 1) when `B(M) <= 0`: the
/// prefix cannot meet `D0` on its own, so the search continues.
pub fn threshold_f<T: Scalar>(m: usize, ranked: &RankedNetwork<'_, T>, d0: T) -> Result<T> {
    if m == 0 || m > ranked.len() {
        return Err(invalid(format!("M = {m} outside 1..={}", ranked.len())));
    }
    let (a, b) = partial_sums(ranked, d0);
    Ok(f_value(ranked.ratios[m - 1].sqrt(), a[m - 1], b[m - 1]))
}

/// Locates `K1` by a linear scan and asserts the crossing is unique.
pub fn find_active_count<T: Scalar>(ranked: &RankedNetwork<'_, T>, d0: T) -> Result<ThresholdState<T>> {
    ProblemSpec::new(ranked.network.clone(), d0, Norm::L1)?.ensure_feasible()?;
    let (a, b) = partial_sums(ranked, d0);
    let f: Vec<T> = (0..ranked.len())
        .map(|i| f_value(ranked.ratios[i].sqrt(), a[i], b[i]))
        .collect();

    // positions (1-based) where f goes from < 1 to >= 1
    let mut crossings = Vec::new();
    let mut resumed = false;
    for m in 1..f.len() {
        let below_prev = f[m - 1] < T::one();
        let below_here = f[m] < T::one();
        if below_prev && !below_here {
            crossings.push(m);
        } else if !below_prev && below_here {
            resumed = true;
        }
    }
    if resumed || crossings.len() > 1 || !(f[0] < T::one()) {
        return Err(Error::NonUniqueThreshold { crossings });
    }
    let active_count = crossings.first().copied().unwrap_or(f.len());
    let eta0 = a[active_count - 1] / b[active_count - 1];
    let lambda0 = (ranked.network.w() * eta0).powi(2);
    Ok(ThresholdState {
        a,
        b,
        f,
        active_count,
        eta0,
        lambda0,
    })
}

/// Minimum `W^2 sum alpha_k` allocation meeting `D0`.
pub fn solve_l1<T: Scalar>(prob: &ProblemSpec<T>) -> Result<Allocation<T>> {
    if prob.norm != Norm::L1 {
        return Err(invalid("solve_l1 called on an L2 problem"));
    }
    prob.ensure_feasible()?;
    let ranked = rank_by_channel(&prob.network);
    let state = find_active_count(&ranked, prob.d0)?;
    allocate_from_state(prob, &ranked, &state)
}

fn allocate_from_state<T: Scalar>(
    prob: &ProblemSpec<T>,
    ranked: &RankedNetwork<'_, T>,
    state: &ThresholdState<T>,
) -> Result<Allocation<T>> {
    if !state.prefix_feasible() || !(state.eta0 > T::zero()) {
        let mut alloc = oracles::solve_l1_bisection(prob, T::epsilon())?.allocation;
        alloc.used_fallback = true;
        return Ok(alloc);
    }
    let net = &prob.network;
    let k = net.len();
    let mut alpha = vec![T::zero(); k];
    let mut r = vec![T::zero(); k];
    for &idx in &ranked.order[..state.active_count] {
        let s = &net.sensors()[idx];
        let c = s.channel_scale();
        let slack = (T::one() - c / state.eta0).max(T::zero());
        r[idx] = slack / s.sigma2;
        alpha[idx] = (c * (state.eta0 - c) / s.sigma2).max(T::zero());
    }
    Allocation::from_parts(net, alpha, r, Norm::L1, state.lambda0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SensorSpec;

    fn net(specs: &[(f64, f64, f64)]) -> NetworkInstance<f64> {
        let sensors = specs
            .iter()
            .map(|&(s, g, x)| SensorSpec::new(s, g, x).unwrap())
            .collect();
        NetworkInstance::new(1.0, sensors, 1.0e4).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn ranking_is_stable() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.01, 1e-6, 1e-12)]);
        assert_eq!(rank_by_channel(&n).order(), &[0, 1]);
        let n = net(&[(0.01, 1e-6, 1e-12), (0.01, 1e-3, 1e-12)]);
        assert_eq!(rank_by_channel(&n).order(), &[1, 0]);
        let n = net(&[(0.03, 1e-3, 1e-12), (0.01, 1e-3, 1e-12), (0.02, 1e-3, 1e-12)]);
        assert_eq!(rank_by_channel(&n).order(), &[0, 1, 2]);
    }

    #[test]
    fn threshold_single_sensor() {
        let n = net(&[(0.01, 1e-3, 1e-12)]);
        let f = threshold_f(1, &rank_by_channel(&n), 0.02).unwrap();
        // c * 50 / (c / 0.01)
        assert!(close(f, 0.5, 1e-12));
    }

    #[test]
    fn threshold_sentinel_when_prefix_short() {
        // B(1) = 100 - 100 = 0 exactly
        let n = net(&[(0.01, 1e-3, 1e-12), (0.01, 1e-3, 1e-12)]);
        let f = threshold_f(1, &rank_by_channel(&n), 0.01).unwrap();
        assert!(f < 1.0);
        assert!(f <= 0.0);
    }

    #[test]
    fn threshold_bad_weak_channel() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.01, 1e-14, 1e-12)]);
        let ranked = rank_by_channel(&n);
        let f2 = threshold_f(2, &ranked, 0.02).unwrap();
        // 10 * 150 / (1000 + sqrt(1e-9)/0.01)
        assert!(close(f2, 1.4999952566, 1e-9), "{f2}");
        assert!(threshold_f(0, &ranked, 0.02).is_err());
        assert!(threshold_f(3, &ranked, 0.02).is_err());
    }

    #[test]
    fn active_count_examples() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.01, 1e-14, 1e-12)]);
        assert_eq!(find_active_count(&rank_by_channel(&n), 0.02).unwrap().active_count, 1);
        let n = net(&[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        let st = find_active_count(&rank_by_channel(&n), 0.02).unwrap();
        assert_eq!(st.active_count, 2);
        assert!(close(st.f[0], 0.5, 1e-12));
        assert!(close(st.f[1], 0.6, 1e-12));
        let n = net(&[(0.01, 1e-3, 1e-12)]);
        assert_eq!(find_active_count(&rank_by_channel(&n), 0.02).unwrap().active_count, 1);
    }

    #[test]
    fn active_count_rejects_infeasible() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        assert!(matches!(
            find_active_count(&rank_by_channel(&n), 0.008),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn single_sensor_solution() {
        let n = net(&[(0.01, 1e-3, 1e-12)]);
        let p = ProblemSpec::new(n, 0.02, Norm::L1).unwrap();
        let a = solve_l1(&p).unwrap();
        assert!(close(a.r[0], 50.0, 1e-12));
        assert!(close(a.alpha[0], 1e-7, 1e-12));
        assert!(close(a.objective, 1e-7, 1e-12));
        assert!(close(a.lambda0.sqrt(), 6.32455532e-5, 1e-8));
        assert!(!a.used_fallback);
    }

    #[test]
    fn heterogeneous_pair_solution() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        let p = ProblemSpec::new(n, 0.02, Norm::L1).unwrap();
        let a = solve_l1(&p).unwrap();
        assert!(close(a.r[0], 40.0, 1e-12));
        assert!(close(a.r[1], 10.0, 1e-12));
        assert!(close(a.alpha[0], 2.0e-7 / 3.0, 1e-12));
        assert!(close(a.alpha[1], 0.5e-7 / 3.0, 1e-12));
        assert!(close(a.objective, 2.5e-7 / 3.0, 1e-12));
        assert_eq!(a.active_count, 2);
    }

    #[test]
    fn weak_channel_is_shut_off() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.01, 1e-14, 1e-12)]);
        let p = ProblemSpec::new(n, 0.02, Norm::L1).unwrap();
        let a = solve_l1(&p).unwrap();
        assert_eq!(a.active_count, 1);
        assert!(close(a.alpha[0], 1e-7, 1e-12));
        assert_eq!(a.alpha[1], 0.0);
        assert_eq!(a.r[1], 0.0);
    }

    #[test]
    fn shut_off_respects_original_order() {
        let n = net(&[(0.01, 1e-14, 1e-12), (0.01, 1e-3, 1e-12)]);
        let p = ProblemSpec::new(n, 0.02, Norm::L1).unwrap();
        let a = solve_l1(&p).unwrap();
        assert_eq!(a.alpha[0], 0.0);
        assert!(close(a.alpha[1], 1e-7, 1e-12));
    }

    #[test]
    fn rejects_l2_problem_and_infeasible_target() {
        let n = net(&[(0.01, 1e-3, 1e-12)]);
        let p = ProblemSpec::new(n.clone(), 0.02, Norm::L2).unwrap();
        assert!(matches!(solve_l1(&p), Err(Error::InvalidInput(_))));
        let p = ProblemSpec::new(n, 0.01, Norm::L1).unwrap();
        match solve_l1(&p) {
            Err(Error::Infeasible { floor, .. }) => assert!(close(floor, 0.01, 1e-14)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_prefix_falls_back_to_bisection() {
        let n = net(&[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        let p = ProblemSpec::new(n, 0.009, Norm::L1).unwrap();
        let ranked = rank_by_channel(&p.network);
        let mut state = find_active_count(&ranked, p.d0).unwrap();
        // force a prefix that cannot meet the target: B(1) = 100 - 111.1 < 0
        state.active_count = 1;
        let fallback = allocate_from_state(&p, &ranked, &state).unwrap();
        assert!(fallback.used_fallback);
        let direct = solve_l1(&p).unwrap();
        assert!(!direct.used_fallback);
        for k in 0..2 {
            assert!(close(fallback.alpha[k], direct.alpha[k], 1e-9));
        }
        let total: f64 = fallback.r.iter().sum();
        assert!(close(total * p.d0, 1.0, 1e-10));
    }

    #[test]
    fn single_precision_pair() {
        let s = |v: f32| SensorSpec::new(v, 1e-3_f32, 1e-12).unwrap();
        let n = NetworkInstance::new(1.0_f32, vec![s(0.01), s(0.04)], 1e4).unwrap();
        let a = solve_l1(&ProblemSpec::new(n, 0.02, Norm::L1).unwrap()).unwrap();
        assert!((a.r[0] - 40.0).abs() < 1e-3);
        assert!((a.r[1] - 10.0).abs() < 1e-3);
    }
}
