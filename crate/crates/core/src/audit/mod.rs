//! Empirical checks of the measurable consequences of the mechanism's
//! guarantees.
//!
//! Every check is a pure function of its arguments and an audit seed; Monte
//! Carlo trial `i` draws from [`trial_seed`](crate::rng::trial_seed)`(seed, i)`,
//! so results do not depend on the number of worker threads.

pub mod bench;
pub mod chi2;
pub mod dp;
pub mod jl;
mod report;
pub mod sensitivity;
pub mod stats;
pub mod utility;

pub use report::{reports_to_csv, reports_to_json, AuditReport, Verdict};
