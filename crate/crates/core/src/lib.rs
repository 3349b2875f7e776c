//! Uplink spectral efficiency of RIS-aided cell-free massive MIMO over
//! spatially correlated Rician fading.
//!
//! The crate has two evaluation paths that are meant to be checked against
//! each other:
//!
//! * a Monte Carlo estimator of the use-and-then-forget (UatF) bound with
//!   optimal large-scale fading decoding, for MR and L-MMSE local combining
//!   ([`se::mc_expectations`]);
//! * the closed-form MR expressions built from second-order channel
//!   statistics ([`se::closed_form_terms`], [`se::closed_form_sinr`]).
//!
//! Module layout follows the processing chain: [`correlation`] and
//! [`scenario`] produce the large-scale picture, [`channel`] draws fading,
//! [`statistics`] and [`estimation`] give the aggregated-channel moments and
//! the phase-aware MMSE estimator, [`combining`] the per-AP receivers, and
//! [`se`] the SINR/SE evaluation. [`experiment`] and [`config`] drive sweeps
//! and write CSV output.

pub mod channel;
pub mod combining;
pub mod config;
pub mod correlation;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod output;
pub mod quadrature;
pub mod scenario;
pub mod se;
pub mod statistics;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
