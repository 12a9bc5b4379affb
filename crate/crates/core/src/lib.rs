//! Diagnosis of classifier prediction errors for machine teaching.
//!
//! Every prediction error of a trained classifier is attributed to exactly
//! one of four causes: a mislabeled example, an inadequate representation,
//! a learner that missed an available consistent hypothesis, or a boundary
//! error that disappears once the object is added to the training set.
//!
//! Module map:
//!
//! - [`domain`]: objects, labels, features, training sets.
//! - [`learners`]: logistic regression (plain and penalized) and nearest
//!   neighbor learners.
//! - [`separability`]: strict linear separability, a convex-hull oracle and
//!   Kirchberger witnesses.
//! - [`diagnosis`]: the four-way error classification.
//! - [`invalidation`]: minimum-size erring sub-training-sets.
//! - [`protocol`]: the error-driven teaching loop and an oracle teacher.
//! - [`scenarios`]: fixtures and the scenario file format.

pub mod diagnosis;
pub mod domain;
pub mod expr;
pub mod invalidation;
pub mod learners;
pub mod protocol;
pub mod scenarios;
pub mod separability;
mod simplex;

pub use simplex::LpError;
