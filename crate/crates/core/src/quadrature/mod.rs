//! Integration rules and measures.

pub mod gauss;
pub mod measure;
pub mod rule;

pub use measure::{normalization_constant, special_moments, Decay, Integral, Measure, SpecialMoments};
pub use rule::{build_rule, QuadratureRule, QuadratureTarget, RuleKind};
