//! Loop vertex expansion: forest combinatorics, the BKAR formula, corner-operator
//! words and Monte Carlo tree amplitudes.

pub mod amplitude;
pub mod bkar;
pub mod faadibruno;
pub mod forest;

pub use amplitude::{amplitude_tree2, amplitude_trivial, lve_partial_sum, AmplitudeEstimate, PartialSum};
pub use bkar::{bkar_identity_check, bkar_interpolate, bkar_psd_check, PairPoly};
pub use faadibruno::{faadibruno_enumerate, faadibruno_numeric_check, Corner, CornerWord};
pub use forest::{enumerate_forests, enumerate_trees, prufer_trees, DecoratedTree, Forest};
