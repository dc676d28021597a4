//! Minimum-power gain allocation for analog amplify-and-forward sensor
//! networks fused by a best linear unbiased estimator (BLUE).
//!
//! The numerical core ([`model`], [`alloc_l1`], [`alloc_l2`], [`oracles`]) is
//! generic over [`Scalar`] (`f32` or `f64`); the aliases below name the `f64`
//! and `f32` instantiations. [`experiments`] runs in `f64` only.
//!
//! ```
//! use wsnpl_core::{solve_l1, Norm, NetworkInstance, ProblemSpec, SensorSpec};
//!
//! let sensors = vec![
//!     SensorSpec::new(0.01, 1e-3, 1e-12).unwrap(),
//!     SensorSpec::new(0.04, 1e-3, 1e-12).unwrap(),
//! ];
//! let net = NetworkInstance::new(1.0, sensors, 1e4).unwrap();
//! let alloc = solve_l1(&ProblemSpec::new(net, 0.02, Norm::L1).unwrap()).unwrap();
//! assert!((alloc.r[0] - 40.0).abs() < 1e-9);
//! ```

pub mod alloc_l1;
pub mod alloc_l2;
pub mod error;
pub mod experiments;
pub mod model;
pub mod objective;
pub mod oracles;
pub mod scalar;

pub use alloc_l1::{find_active_count, rank_by_channel, solve_l1, threshold_f};
pub use alloc_l2::{kkt_residual_l2, solve_l2, solve_l2_traced};
pub use error::{Error, Result};
pub use model::{analytic_mse, blue_estimate, distortion_floor, power_metrics, Norm};
pub use oracles::OracleMethod;
pub use scalar::Scalar;

pub type SensorSpec = model::SensorSpec<f64>;
pub type NetworkInstance = model::NetworkInstance<f64>;
pub type Allocation = model::Allocation<f64>;
pub type ProblemSpec = model::ProblemSpec<f64>;
pub type L2SolverOptions = alloc_l2::L2SolverOptions<f64>;
pub type OracleReport = oracles::OracleReport<f64>;

pub type SensorSpecF32 = model::SensorSpec<f32>;
pub type NetworkInstanceF32 = model::NetworkInstance<f32>;
pub type AllocationF32 = model::Allocation<f32>;
pub type ProblemSpecF32 = model::ProblemSpec<f32>;
pub type L2SolverOptionsF32 = alloc_l2::L2SolverOptions<f32>;
pub type OracleReportF32 = oracles::OracleReport<f32>;
