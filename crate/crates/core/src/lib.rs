pub mod contour;
pub mod error;
pub mod exec;
pub mod fuss_catalan;
pub mod lvr_action;
pub mod lve;
pub mod mc;
pub mod oracle;
pub mod perturbation;
pub mod quadrature;
pub mod verify;

pub use error::{LvrError, Result};

pub type C64 = num_complex::Complex<f64>;
