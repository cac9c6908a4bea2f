//! Chained polar coding for the two-receiver wiretap broadcast channel with
//! private and confidential messages.
//!
//! Module map:
//!
//! * [`dms_model`] — the joint source, information quantities, situations;
//! * [`polar_core`] — polar transform, SC primitives, entropy profiles;
//! * [`set_builder`] — H/L sets, inner partition, cases, chaining plans;
//! * [`chaining_codec`] — the L-block chained encoder and both decoders;
//! * [`channel_sim`] — channel sampling and reliability experiments;
//! * [`analysis`] — regions, corner points, empirical rates, exact TV and
//!   leakage verification.

// Index loops mirror the per-position notation of the construction.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod dms_model;
pub mod polar_core;
pub mod set_builder;
pub mod chaining_codec;
pub mod analysis;
pub mod channel_sim;

pub use dms_model::{information_quantities, load_model, InfoReport, JointModel, Situation, SituationKind, Var};
pub use error::{Error, ErrorClass, Result};
pub use polar_core::{CodeConfig, EntropyProfile, LayerSpec, ProfileMethod};
