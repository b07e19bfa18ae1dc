//! Position verification for wireless sensor networks without trusted nodes,
//! under Gaussian noise on received signal strength.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: path-loss model, RSS distance estimate, 3σ acceptance test.
//! - [`adversary`]: a malicious node's optimal fake position.
//! - [`theta`]: Monte-Carlo calibration of the deception allowance θ* and the
//!   closed-form acceptance predictors.
//! - [`protocol`]: the accuse/approve exchange and the iterative filtering.
//! - [`harness`]: deployments, experiment presets, reports.
//!
//! The signal and geometry layers are generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix them to `f64`, which the protocol and harness use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod channel;
pub mod error;
pub mod gaussian;
pub mod geometry;
pub mod harness;
pub mod protocol;
pub mod scalar;
pub mod seed;
pub mod theta;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use channel::{NotEstimable, Verdict};
pub use protocol::{AccusationMatrix, FilterResult, FilterRound, NodeKind};
pub use theta::ThetaTable;

pub type Point = geometry::Point<f64>;
pub type Region = geometry::Region<f64>;
pub type SignalParams = channel::SignalParams<f64>;
pub type AcceptanceInterval = channel::AcceptanceInterval<f64>;
pub type FakingSearchConfig = adversary::FakingSearchConfig<f64>;
pub type FakingOutcome = adversary::FakingOutcome<f64>;
pub type Node = protocol::Node<f64>;

pub type SignalParamsF32 = channel::SignalParams<f32>;
pub type PointF32 = geometry::Point<f32>;
