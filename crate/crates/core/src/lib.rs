//! Perturbation-based learners for adversarial multi-armed bandits.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece
//! of the toolkit:
//!
//! - [`distributions`]: perturbation distributions with exact pdf, cdf,
//!   quantile, sampling, expectation bounds and scale composition.
//! - [`hazard`]: hazard and generalized hazard rates, numerical suprema,
//!   tail classification and eventual-monotonicity verdicts.
//! - [`smoothing`]: the stochastically smoothed max potential, its gradient
//!   (three estimators), Hessian diagonal, Bregman divergence and the
//!   per-round divergence penalty.
//! - [`gbpa`]: the gradient-based prediction loop, in its exact-gradient form
//!   and as follow-the-perturbed-leader with geometric resampling.
//! - [`adversaries`], [`baselines`], [`tuning`]: oblivious gain sequences,
//!   the EXP3 reference learner and closed-form scale schedules.
//! - [`harness`]: episode runner, regret accounting, penalty decomposition
//!   and regret-exponent fitting.
//!
//! IO, sweeps and the command line live in the `banditlab` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adversaries;
pub mod baselines;
pub mod distributions;
pub mod error;
pub mod gbpa;
pub mod harness;
pub mod hazard;
pub mod quad;
pub mod rng;
pub mod smoothing;
pub mod special;
pub mod tuning;

pub use error::{Error, Result};
