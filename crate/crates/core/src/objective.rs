//! Per-sensor objective terms in precision space.
//!
//! With `w = W^2 xi2/g` and `q = 1 - sigma2 r`, the objective power of
//! sensor `k` is `phi(r) = w r / q` (that is `W^2 alpha`). The L1 program sums
//! `phi`, the L2 program sums `phi^2`.

use crate::model::{Norm, ProblemSpec};
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term<T> {
    pub weight: T,
    pub sigma2: T,
}

impl<T: Scalar> Term<T> {
    fn parts(&self, r: T) -> (T, T, T) {
        let q = T::one() - self.sigma2 * r;
        let phi = self.weight * r / q;
        let d1 = self.weight / (q * q);
        let d2 = T::lit(2.0) * self.weight * self.sigma2 / (q * q * q);
        (phi, d1, d2)
    }

    pub fn value(&self, norm: Norm, r: T) -> T {
        let (phi, _, _) = self.parts(r);
        match norm {
            Norm::L1 => phi,
            Norm::L2 => phi * phi,
        }
    }

    pub fn derivative(&self, norm: Norm, r: T) -> T {
        let (phi, d1, _) = self.parts(r);
        match norm {
            Norm::L1 => d1,
            Norm::L2 => T::lit(2.0) * phi * d1,
        }
    }

    pub fn curvature(&self, norm: Norm, r: T) -> T {
        let (phi, d1, d2) = self.parts(r);
        match norm {
            Norm::L1 => d2,
            Norm::L2 => T::lit(2.0) * (d1 * d1 + phi * d2),
        }
    }
}

pub fn terms<T: Scalar>(prob: &ProblemSpec<T>) -> Vec<Term<T>> {
    let w2 = prob.network.w() * prob.network.w();
    prob.network
        .sensors()
        .iter()
        .map(|s| Term {
            weight: w2 * s.noise_to_gain(),
            sigma2: s.sigma2,
        })
        .collect()
}

pub fn total<T: Scalar>(terms: &[Term<T>], norm: Norm, r: &[T]) -> T {
    compensated_sum(terms.iter().zip(r).map(|(t, &x)| t.value(norm, x)))
}
