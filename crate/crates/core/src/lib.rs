//! Monte Carlo simulator for repeat-until-success T-gate magic-state
//! injection in GKP-encoded photonic qubits.
//!
//! Layers, bottom up: [`qmath`] (2×2 and 4×4 density matrices, channels),
//! [`noise`] (squeezing, loss and depolarizing model), [`injection`] (the
//! gadget and the RUS loop), [`outer_code`] (surface-code scaling law),
//! [`sweep`] (seeded grid runs and CSV tables), [`analysis`] (sensitivity
//! maps and phase boundaries), then [`config`], [`calibrate`] and [`cli`].

pub mod analysis;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod injection;
pub mod noise;
pub mod outer_code;
pub mod qmath;
pub mod stream;
pub mod sweep;

pub use error::{DomainError, Error, Result};
