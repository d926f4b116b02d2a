//! Classical representability of probability assignments, Bell-type
//! inequalities, and hidden-variable models of the spin-correlation
//! experiment.
//!
//! The numeric core is generic over its scalar. [`scalar::Scalar`] covers
//! `f32`, `f64` and exact [`Rational`]s; [`scalar::Real`] covers the float
//! types used by the spin algebra. The aliases below fix the common choices.

pub mod fine;
pub mod inequalities;
pub mod labrecord;
pub mod ldm;
pub mod polytope;
pub mod qprob;
pub mod scalar;
pub mod simplex;
pub mod stream;

pub use num_rational::BigRational as Rational;

pub use scalar::{Real, Scalar};

pub type Direction = qprob::Direction<f64>;
pub type DensityOperator = qprob::DensityOperator<f64>;
pub type ProjectorEvent = qprob::ProjectorEvent<f64>;

pub type CorrelationVector = polytope::CorrelationVector<f64>;
pub type ExactCorrelationVector = polytope::CorrelationVector<Rational>;
pub type MembershipVerdict = polytope::MembershipVerdict<f64>;
pub type ExactMembershipVerdict = polytope::MembershipVerdict<Rational>;

pub type InequalityReport = inequalities::InequalityReport<f64>;
pub type ExactInequalityReport = inequalities::InequalityReport<Rational>;
pub type EprConditionalTable = inequalities::EprConditionalTable<f64>;
pub type ExactEprConditionalTable = inequalities::EprConditionalTable<Rational>;

pub type LdmModel = ldm::LdmModel<f64>;
pub type ExactLdmModel = ldm::LdmModel<Rational>;
pub type EnsembleStats = ldm::EnsembleStats<f64>;
