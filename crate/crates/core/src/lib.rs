//! Estimation of the currency composition of foreign-exchange reserve
//! portfolios from their observed valuation changes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod cli;
pub mod equity_share;
pub mod error;
pub mod io;
pub mod particle_filter;
pub mod pipeline;
pub mod simplex;
pub mod simplex_lsq;
pub mod state_model;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use simplex::SimplexShares;
