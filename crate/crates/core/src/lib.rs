//! Sliding-window aggregate feature selection without materializing the
//! feature table.
//!
//! Each (entity, feature) column of the action table is resampled onto a
//! fixed grid and summarized by a handful of fitted parameters. The sliding
//! window over that column is treated as a Markov chain whose stationary law
//! is a Gaussian mixture; closed-form confidence bounds on the avg/max/min
//! aggregates follow from a Markov-chain Hoeffding inequality and Gaussian
//! extreme value asymptotics. A random forest trained on feature tables
//! sampled from those bounds ranks the candidate features.
//!
//! The [`oracle`] module generates the real feature table by brute force and
//! simulates the window chain, so every estimate can be checked.

pub mod bounds;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod forest;
pub mod oracle;
pub mod parallel;
pub mod selector;
pub mod spectral;
pub mod synthetic;
pub mod window;

pub use error::{Error, Result};
