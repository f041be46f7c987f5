//! Systemic risk in small interbank networks: balance sheets, correlated
//! asset returns, payment clearing, and the experiments built on them.

pub mod analysis;
pub mod assets;
pub mod balance;
pub mod clearing;
pub mod graph;
mod linalg;
pub mod risk;
pub mod scenario;
pub mod stats;

/// Round-trippable float formatting for CSV output.
pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
