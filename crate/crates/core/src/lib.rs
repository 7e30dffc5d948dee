//! Stochastic simulation of linear BGK and linear Boltzmann kinetic
//! equations together with explicit Doeblin, Harris and subgeometric
//! convergence certificates.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod certificate;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod jump;
pub mod kernel;
pub mod lyapunov;
pub mod metrics;
pub mod numerics;
pub mod potential;
pub mod vector;

pub use error::{Error, Result};
