//! Sensor/network data model, unit conversions, the BLUE fusion estimator
//! and the power metrics of an allocation.
//!
//! Each sensor `k` observes `theta + n_k` (noise variance `sigma2`), scales it
//! by an amplifier power gain `alpha_k` and forwards it over a channel with
//! power gain `gain` and additive noise of variance `xi2`. The sampled signal
//! at the fusion center is
//!
//! ```text
//! y_k = sqrt(alpha_k g_k) (theta + n_k) + nc_k
//! ```
//!
//! The per-sensor contribution to the inverse MSE of the BLUE estimate is the
//! effective precision `r_k = alpha_k g_k / (sigma2_k alpha_k g_k + xi2_k)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::{compensated_sum, Scalar};

/// `10^(x/10)`.
pub fn db_to_linear<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// dBm to watts, `10^((x - 30)/10)`.
pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    db_to_linear(dbm - T::lit(30.0))
}

/// Path-loss channel power gain `g0 * d^(-exponent)`.
pub fn channel_gain<T: Scalar>(distance: T, g0: T, exponent: T) -> Result<T> {
    if !(distance > T::zero()) || !distance.is_finite() {
        return Err(invalid(format!("distance must be positive, got {distance}")));
    }
    if !(g0 > T::zero()) {
        return Err(invalid(format!("reference gain must be positive, got {g0}")));
    }
    Ok(g0 * distance.powf(-exponent))
}

fn positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Physical description of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec<T> {
    /// Observation-noise variance.
    pub sigma2: T,
    /// Distance to the fusion center, when the gain was derived from one.
    pub distance: Option<T>,
    /// Linear channel power gain.
    pub gain: T,
    /// Channel-noise variance in watts.
    pub xi2: T,
}

impl<T: Scalar> SensorSpec<T> {
    pub fn new(sigma2: T, gain: T, xi2: T) -> Result<Self> {
        let s = Self {
            sigma2,
            distance: None,
            gain,
            xi2,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sensor whose gain follows the path-loss law `g0 / d^exponent`.
    pub fn at_distance(sigma2: T, distance: T, g0: T, exponent: T, xi2: T) -> Result<Self> {
        let gain = channel_gain(distance, g0, exponent)?;
        let s = Self {
            sigma2,
            distance: Some(distance),
            gain,
            xi2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma2", self.sigma2)?;
        positive("gain", self.gain)?;
        positive("xi2", self.xi2)?;
        if let Some(d) = self.distance {
            positive("distance", d)?;
        }
        Ok(())
    }

    /// `xi2 / g`, the inverse channel SNR used for ranking.
    pub fn noise_to_gain(&self) -> T {
        self.xi2 / self.gain
    }

    /// `sqrt(xi2 / g)`.
    pub fn channel_scale(&self) -> T {
        self.noise_to_gain().sqrt()
    }

    /// Upper end of the effective precision box, `1 / sigma2`.
    pub fn max_precision(&self) -> T {
        self.sigma2.recip()
    }

    /// Effective precision delivered by amplifier gain `alpha`.
    pub fn precision(&self, alpha: T) -> T {
        if alpha <= T::zero() {
            return T::zero();
        }
        let ag = alpha * self.gain;
        ag / (self.sigma2 * ag + self.xi2)
    }

    /// Gain needed to reach precision `r`, inverse of [`SensorSpec::precision`].
    pub fn gain_for_precision(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        self.noise_to_gain() * r / (T::one() - self.sigma2 * r)
    }
}

/// Network-level optimization input: amplitude bound, sensors, bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance<T> {
    w: T,
    sensors: Vec<SensorSpec<T>>,
    bandwidth: T,
}

impl<T: Scalar> NetworkInstance<T> {
    pub fn new(w: T, sensors: Vec<SensorSpec<T>>, bandwidth: T) -> Result<Self> {
        positive("W", w)?;
        positive("bandwidth", bandwidth)?;
        if sensors.is_empty() {
            return Err(invalid("network needs at least one sensor"));
        }
        for (k, s) in sensors.iter().enumerate() {
            s.validate()
                .map_err(|e| invalid(format!("sensor {k}: {e}")))?;
        }
        Ok(Self {
            w,
            sensors,
            bandwidth,
        })
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn sensors(&self) -> &[SensorSpec<T>] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Same sensors under a different amplitude bound.
    pub fn with_w(&self, w: T) -> Result<Self> {
        Self::new(w, self.sensors.clone(), self.bandwidth)
    }

    /// Same network with one extra sensor appended.
    pub fn with_sensor(&self, sensor: SensorSpec<T>) -> Result<Self> {
        let mut sensors = self.sensors.clone();
        sensors.push(sensor);
        Self::new(self.w, sensors, self.bandwidth)
    }

    /// `sum_k 1/sigma2_k`.
    pub fn total_precision(&self) -> T {
        compensated_sum(self.sensors.iter().map(SensorSpec::max_precision))
    }

    /// Effective precisions `r_k` produced by `alpha`.
    pub fn precisions(&self, alpha: &[T]) -> Result<Vec<T>> {
        self.check_dim(alpha.len())?;
        Ok(self
            .sensors
            .iter()
            .zip(alpha)
            .map(|(s, &a)| s.precision(a))
            .collect())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n == self.sensors.len() {
            Ok(())
        } else {
            Err(invalid(format!(
                "dimension mismatch: {n} values for {} sensors",
                self.sensors.len()
            )))
        }
    }
}

/// Which norm of the per-node power vector is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L1" | "l1" => Ok(Norm::L1),
            "L2" | "l2" => Ok(Norm::L2),
            other => Err(invalid(format!("unknown norm {other:?} (expected L1 or L2)"))),
        }
    }
}

/// A solved (or baseline) amplifier-gain assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    /// Amplifier power gains, original sensor order.
    pub alpha: Vec<T>,
    /// Effective precisions, original sensor order.
    pub r: Vec<T>,
    /// Number of sensors with positive gain.
    pub active_count: usize,
    /// Multiplier of the distortion constraint. For L1 this is
    /// `(W A(K1)/B(K1))^2`; for L2 the stationarity multiplier of the
    /// L2 objective.
    pub lambda0: T,
    /// Value of the norm-dependent objective.
    pub objective: T,
    /// Physical per-node power bound `4 W^2 alpha_k`.
    pub node_powers: Vec<T>,
    pub norm: Norm,
    /// Set when the closed form handed over to the multiplier bisection.
    pub used_fallback: bool,
}

impl<T: Scalar> Allocation<T> {
    /// Builds the derived fields (`r`, objective, node powers) from gains.
    pub fn from_gains(net: &NetworkInstance<T>, alpha: Vec<T>, norm: Norm, lambda0: T) -> Result<Self> {
        let r = net.precisions(&alpha)?;
        Self::from_parts(net, alpha, r, norm, lambda0)
    }

    /// Builds an allocation from precisions, mapping back to gains.
    pub fn from_precisions(net: &NetworkInstance<T>, r: Vec<T>, norm: Norm, lambda0: T) -> Result<Self> {
        net.check_dim(r.len())?;
        let alpha = net
            .sensors()
            .iter()
            .zip(&r)
            .map(|(s, &rk)| s.gain_for_precision(rk))
            .collect();
        Self::from_parts(net, alpha, r, norm, lambda0)
    }

    pub(crate) fn from_parts(
        net: &NetworkInstance<T>,
        alpha: Vec<T>,
        r: Vec<T>,
        norm: Norm,
        lambda0: T,
    ) -> Result<Self> {
        net.check_dim(alpha.len())?;
        if let Some(k) = alpha.iter().position(|&a| !(a >= T::zero())) {
            return Err(invalid(format!("negative or NaN gain at sensor {k}")));
        }
        let metrics = power_metrics(&alpha, net, norm)?;
        Ok(Self {
            active_count: alpha.iter().filter(|&&a| a > T::zero()).count(),
            alpha,
            r,
            lambda0,
            objective: metrics.objective,
            node_powers: metrics.node_powers,
            norm,
            used_fallback: false,
        })
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.alpha[k] > T::zero()
    }

    /// BLUE variance of this allocation.
    pub fn distortion(&self, net: &NetworkInstance<T>) -> Result<T> {
        analytic_mse(&self.alpha, net)
    }

    /// Objective of this allocation under another norm.
    pub fn objective_under(&self, net: &NetworkInstance<T>, norm: Norm) -> Result<T> {
        power_metrics(&self.alpha, net, norm).map(|m| m.objective)
    }
}

/// Optimization problem: network, distortion target and norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<T> {
    pub network: NetworkInstance<T>,
    pub d0: T,
    pub norm: Norm,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(network: NetworkInstance<T>, d0: T, norm: Norm) -> Result<Self> {
        positive("D0", d0)?;
        Ok(Self { network, d0, norm })
    }

    pub fn with_norm(&self, norm: Norm) -> Self {
        Self {
            norm,
            ..self.clone()
        }
    }

    pub fn with_d0(&self, d0: T) -> Result<Self> {
        Self::new(self.network.clone(), d0, self.norm)
    }

    /// Errors unless `d0` exceeds the distortion floor by the strict
    /// relative margin `1e-12`.
    pub fn ensure_feasible(&self) -> Result<T> {
        let floor = distortion_floor(&self.network);
        if self.d0 > floor * (T::one() + T::lit(1e-12)) {
            Ok(floor)
        } else {
            Err(Error::Infeasible {
                d0: self.d0.as_f64(),
                floor: floor.as_f64(),
            })
        }
    }

    /// Required total precision `1/D0`.
    pub fn target_precision(&self) -> T {
        self.d0.recip()
    }
}

/// BLUE variance `(sum_k r_k)^-1`; `+inf` when nothing is received.
pub fn analytic_mse<T: Scalar>(alpha: &[T], net: &NetworkInstance<T>) -> Result<T> {
    let total = compensated_sum(net.precisions(alpha)?);
    if total > T::zero() {
        Ok(total.recip())
    } else {
        Ok(T::infinity())
    }
}

/// BLUE estimate of `theta` from one received sample per sensor (original
/// order). Sensors with zero gain carry zero weight.
pub fn blue_estimate<T: Scalar>(y: &[T], alpha: &[T], net: &NetworkInstance<T>) -> Result<T> {
    net.check_dim(alpha.len())?;
    net.check_dim(y.len())?;
    let weights = BlueWeights::new(alpha, net)?;
    Ok(weights.apply(y))
}

/// Precomputed BLUE combining weights, reused across Monte-Carlo draws.
#[derive(Debug, Clone)]
pub struct BlueWeights<T> {
    weights: Vec<T>,
}

impl<T: Scalar> BlueWeights<T> {
    pub fn new(alpha: &[T], net: &NetworkInstance<T>) -> Result<Self> {
        net.check_dim(alpha.len())?;
        let mut raw = Vec::with_capacity(alpha.len());
        let mut denom_terms = Vec::with_capacity(alpha.len());
        for (s, &a) in net.sensors().iter().zip(alpha) {
            if a > T::zero() {
                let ag = a * s.gain;
                let var = s.sigma2 * ag + s.xi2;
                raw.push(ag.sqrt() / var);
                denom_terms.push(ag / var);
            } else {
                raw.push(T::zero());
            }
        }
        let information = compensated_sum(denom_terms);
        if !(information > T::zero()) {
            return Err(Error::NoEstimator);
        }
        Ok(Self {
            weights: raw.into_iter().map(|w| w / information).collect(),
        })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn apply(&self, y: &[T]) -> T {
        compensated_sum(self.weights.iter().zip(y).map(|(&w, &v)| w * v))
    }
}

/// `(sum_k 1/sigma2_k)^-1`, the distortion reached with unbounded power.
pub fn distortion_floor<T: Scalar>(net: &NetworkInstance<T>) -> T {
    net.total_precision().recip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMetrics<T> {
    pub objective: T,
    pub node_powers: Vec<T>,
}

/// Objective and physical node powers of a gain vector.
///
/// L1: `W^2 sum alpha_k`. L2: `sum (W^2 alpha_k)^2`. Node powers are always
/// the physical bound `4 W^2 alpha_k`.
pub fn power_metrics<T: Scalar>(alpha: &[T], net: &NetworkInstance<T>, norm: Norm) -> Result<PowerMetrics<T>> {
    net.check_dim(alpha.len())?;
    let w2 = net.w() * net.w();
    let objective = match norm {
        Norm::L1 => w2 * compensated_sum(alpha.iter().copied()),
        Norm::L2 => compensated_sum(alpha.iter().map(|&a| (w2 * a) * (w2 * a))),
    };
    Ok(PowerMetrics {
        objective,
        node_powers: alpha.iter().map(|&a| T::lit(4.0) * w2 * a).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(w: f64, specs: &[(f64, f64, f64)]) -> NetworkInstance<f64> {
        let sensors = specs
            .iter()
            .map(|&(s, g, x)| SensorSpec::new(s, g, x).unwrap())
            .collect();
        NetworkInstance::new(w, sensors, 1.0e4).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn db_conversions() {
        assert_eq!(db_to_linear(0.0_f64), 1.0);
        assert!(close(db_to_linear(-30.0_f64), 1.0e-3, 1e-14));
        assert!(close(dbm_to_watts(-90.0_f64), 1.0e-12, 1e-14));
    }

    #[test]
    fn path_loss_gain() {
        assert!(close(channel_gain(1.0_f64, 1e-3, 3.5).unwrap(), 1e-3, 1e-15));
        assert_eq!(channel_gain(1.0_f64, 1.0, 0.0).unwrap(), 1.0);
        assert!(close(channel_gain(10.0_f64, 1e-3, 3.5).unwrap(), 3.16227766e-7, 1e-8));
        assert!(matches!(channel_gain(0.0_f64, 1e-3, 3.5), Err(Error::InvalidInput(_))));
        assert!(matches!(channel_gain(-2.0_f64, 1e-3, 3.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_sensors_and_networks() {
        assert!(SensorSpec::new(0.0_f64, 1e-3, 1e-12).is_err());
        assert!(SensorSpec::new(0.01_f64, -1.0, 1e-12).is_err());
        assert!(SensorSpec::new(0.01_f64, 1e-3, 0.0).is_err());
        assert!(NetworkInstance::<f64>::new(1.0, vec![], 1.0).is_err());
        let s = SensorSpec::new(0.01_f64, 1e-3, 1e-12).unwrap();
        assert!(NetworkInstance::new(0.0, vec![s.clone()], 1.0).is_err());
        assert!(NetworkInstance::new(1.0, vec![s], 0.0).is_err());
    }

    #[test]
    fn mse_single_sensor() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12)]);
        // r = 1/(0.01 + 1e-12/1e-10) = 50
        assert!(close(analytic_mse(&[1e-7], &n).unwrap(), 0.02, 1e-12));
    }

    #[test]
    fn mse_all_zero_is_infinite() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        assert!(analytic_mse(&[0.0, 0.0], &n).unwrap().is_infinite());
    }

    #[test]
    fn mse_noiseless_channel_limit() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-30), (0.04, 1e-3, 1e-30)]);
        assert!(close(analytic_mse(&[1.0, 1.0], &n).unwrap(), 0.008, 1e-12));
    }

    #[test]
    fn mse_dimension_mismatch() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12)]);
        assert!(matches!(analytic_mse(&[1.0, 2.0], &n), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn blue_single_sensor_inverts_channel() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12)]);
        let alpha = 1e-7;
        let y = 0.37;
        let est = blue_estimate(&[y], &[alpha], &n).unwrap();
        assert!(close(est, y / (alpha * 1e-3_f64).sqrt(), 1e-12));
    }

    #[test]
    fn blue_two_sensor_noiseless_input() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        let alpha = [6.667e-8, 1.667e-8];
        let y: Vec<f64> = alpha.iter().map(|a| (a * 1e-3_f64).sqrt() * 1.0).collect();
        let est = blue_estimate(&y, &alpha, &n).unwrap();
        assert!(close(est, 1.0, 1e-12));
        let w = BlueWeights::new(&alpha, &n).unwrap();
        let norm: f64 = w
            .weights()
            .iter()
            .zip(&alpha)
            .map(|(wk, a)| wk * (a * 1e-3_f64).sqrt())
            .sum();
        assert!(close(norm, 1.0, 1e-12));
    }

    #[test]
    fn blue_ignores_inactive_sensors() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        let alpha = [1e-7, 0.0];
        let y = [(1e-10_f64).sqrt() * 0.25, 123.0];
        assert!(close(blue_estimate(&y, &alpha, &n).unwrap(), 0.25, 1e-12));
    }

    #[test]
    fn blue_all_zero_errors() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12)]);
        assert_eq!(blue_estimate(&[1.0], &[0.0], &n), Err(Error::NoEstimator));
    }

    #[test]
    fn floor_values() {
        assert!(close(distortion_floor(&net(1.0, &[(0.01, 1e-3, 1e-12)])), 0.01, 1e-15));
        let two = net(1.0, &[(0.01, 1e-3, 1e-12), (0.04, 1e-3, 1e-12)]);
        assert!(close(distortion_floor(&two), 0.008, 1e-15));
        let five = net(1.0, &[(0.03, 1e-3, 1e-12); 5]);
        assert!(close(distortion_floor(&five), 0.006, 1e-14));
    }

    #[test]
    fn power_metrics_conventions() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12)]);
        let m = power_metrics(&[1e-7], &n, Norm::L1).unwrap();
        assert!(close(m.objective, 1e-7, 1e-15));
        assert!(close(m.node_powers[0], 4e-7, 1e-15));
        assert_eq!(power_metrics(&[0.0], &n, Norm::L1).unwrap().objective, 0.0);
        let n2 = n.with_w(2.0).unwrap();
        let m2 = power_metrics(&[1e-7], &n2, Norm::L1).unwrap();
        assert!(close(m2.objective, 4.0 * m.objective, 1e-15));
        let l2 = power_metrics(&[1e-7], &n2, Norm::L2).unwrap();
        assert!(close(l2.objective, (4.0e-7_f64).powi(2), 1e-15));
    }

    #[test]
    fn precision_gain_maps_are_inverse() {
        let s = SensorSpec::new(0.02_f64, 3e-6, 1e-12).unwrap();
        let a = 4.2e-5;
        let r = s.precision(a);
        assert!(r < s.max_precision());
        assert!(close(s.gain_for_precision(r), a, 1e-12));
        assert_eq!(s.precision(0.0), 0.0);
    }

    #[test]
    fn mse_decreases_in_each_gain() {
        let n = net(1.0, &[(0.01, 1e-3, 1e-12), (0.05, 1e-5, 1e-12)]);
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let a = 1e-9 * 1.5_f64.powi(i);
            let d = analytic_mse(&[a, 3e-6], &n).unwrap();
            assert!(d < prev);
            assert!(d >= distortion_floor(&n));
            prev = d;
        }
    }

    #[test]
    fn works_in_single_precision() {
        let s = SensorSpec::new(0.01_f32, 1e-3, 1e-12).unwrap();
        let n = NetworkInstance::new(1.0_f32, vec![s], 1.0e4).unwrap();
        let d = analytic_mse(&[1e-7_f32], &n).unwrap();
        assert!((d - 0.02).abs() < 1e-6);
    }
}
