//! Passive six-dimensional movable antenna (6DMA) surfaces for multiuser uplink.
//!
//! A set of `B` passive reflecting surfaces, each with an adjustable 3D position
//! and 3D rotation, relays `K` single-antenna users to an `M`-antenna base
//! station. This crate provides
//!
//! - the far-field geometric channel model ([`geometry`], [`radiation`], [`channel`]),
//! - the alternating optimizer for receive beamforming, surface poses and
//!   reflection phases ([`optimizer`]),
//! - seeded scenario generation ([`scenario`]) and a Monte-Carlo experiment
//!   runner with CSV/JSON output ([`experiment`], [`cli`]).
//!
//! All physical quantities are SI (meters, radians, watts) unless a name says
//! otherwise (`*_dbm`).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod numerics;
pub mod optimizer;
pub mod radiation;
pub mod scenario;

pub use error::{Error, Result};

/// Complex scalar used throughout the channel model.
pub type C64 = nalgebra::Complex<f64>;
