//! Numerical verification of Beckner, Poincaré, log-Sobolev and
//! uncertainty inequalities for weighted Gaussian measures on convex cones.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod error;
pub mod weight;

pub use cone::Cone;
pub use error::{Error, Result};
pub use weight::{CustomWeight, Weight, WeightSpec};
pub mod quadrature;

pub use quadrature::{Decay, Integral, Measure, QuadratureRule, QuadratureTarget};
pub mod field;
pub use field::{Field, FieldSpec, Jet, Parity, ScalarField};
pub mod calculus;
pub mod functionals;
pub mod inequality;
pub mod report;
pub mod spectral;
pub mod stability;
