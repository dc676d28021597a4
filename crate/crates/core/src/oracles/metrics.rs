use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// `(j_uniform - j_opt) / j_uniform`.
///
/// Differences below `1e-9` relative are rounding and report as zero; a
/// larger excess of `j_opt` over `j_uniform` is a consistency error.
pub fn relative_power_savings<T: Scalar>(j_opt: T, j_uniform: T) -> Result<T> {
    if !(j_uniform > T::zero()) {
        return Err(invalid(format!("uniform objective must be positive, got {j_uniform}")));
    }
    if j_opt > j_uniform * (T::one() + T::lit(1e-9)) {
        return Err(Error::Consistency(format!(
            "optimal objective {:e} exceeds uniform objective {:e}",
            j_opt.as_f64(),
            j_uniform.as_f64()
        )));
    }
    Ok(((j_uniform - j_opt) / j_uniform).max(T::zero()))
}

/// Average node lifetime over nodes that actually draw power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lifetime<T> {
    /// `mean_k E0/P_k` over nodes with `P_k > 0`; `+inf` if there are none.
    pub mean_finite: T,
    /// Nodes with `P_k = 0`, which never drain.
    pub infinite_nodes: usize,
    pub nodes: usize,
}

pub fn average_node_lifetime<T: Scalar>(node_powers: &[T], e0: T) -> Result<Lifetime<T>> {
    if !(e0 > T::zero()) {
        return Err(invalid(format!("battery energy must be positive, got {e0}")));
    }
    if let Some(p) = node_powers.iter().find(|p| !(**p >= T::zero())) {
        return Err(invalid(format!("node power must be nonnegative, got {p}")));
    }
    let finite: Vec<T> = node_powers
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| e0 / p)
        .collect();
    let mean_finite = if finite.is_empty() {
        T::infinity()
    } else {
        finite.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(finite.len())
    };
    Ok(Lifetime {
        mean_finite,
        infinite_nodes: node_powers.len() - finite.len(),
        nodes: node_powers.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultipleAccess {
    /// Single-sideband analog links, frequency division: `B/2` per sensor.
    AnalogSsbFdma,
    /// Sampled, quantized links at symbol rate `B`, time division: `B` per sensor.
    DigitalTdma,
}

/// Total passband bandwidth for `k` sensors of baseband bandwidth `b`.
pub fn bandwidth_requirement<T: Scalar>(k: usize, b: T, scheme: MultipleAccess) -> Result<T> {
    if k == 0 {
        return Err(invalid("need at least one sensor"));
    }
    if !(b > T::zero()) {
        return Err(invalid(format!("bandwidth must be positive, got {b}")));
    }
    let total = T::from_usize_lossy(k) * b;
    Ok(match scheme {
        MultipleAccess::AnalogSsbFdma => total / T::lit(2.0),
        MultipleAccess::DigitalTdma => total,
    })
}
