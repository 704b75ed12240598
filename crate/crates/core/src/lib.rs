#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Econometric toolkit for daily index returns: return transforms,
//! dependence and stationarity diagnostics, ARIMA identification and
//! estimation, GARCH-family volatility models, and DCC-GARCH dynamic
//! correlations with multi-step forecasts.

pub mod arima;
pub mod data;
pub mod error;
pub mod garch;
pub mod hypothesis;
mod linalg;
pub mod mgarch;
pub mod optim;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
