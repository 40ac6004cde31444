//! Exact perturbative coefficients: Gaussian trace moments, the `λ`-expansion of `S`
//! and the connected coefficients of `log Z` in both representations.

pub mod action;
pub mod moments;
pub mod poly;
pub mod quartic;
pub mod trace;

pub use action::{effective_action_series, logz_series, s1_closed_form, s2_closed_form};
pub use moments::{gaussian_moment, sd_reduce, wick_moment, MomentEngine};
pub use poly::BivariatePoly;
pub use quartic::quartic_report;
pub use trace::{TraceMonomial, TracePolynomial};
