//! Hellinger-affinity bounds for Kraft's test of simple hypotheses under
//! parameter expansion, and a simulator for collected-data augmentation of
//! non-representative survey respondents.
//!
//! The testing side works at the level of sufficient statistics: a
//! [`model::ExpandedModel`] gives the marginal density of `t1` and the
//! conditional density of `t2 | t1`. [`affinity`] integrates the bounds and
//! the activation measure `R`, [`kraft`] makes test decisions, and
//! [`monte_carlo`] estimates the error probabilities the bounds control.
//! [`survey`] holds the augmentation simulator.

pub mod affinity;
pub mod density;
pub mod error;
pub mod kraft;
pub mod model;
pub mod monte_carlo;
pub mod quadrature;
pub mod seeding;
pub mod survey;

pub use affinity::{
    activation_measure, affinity, conditional_affinity, expanded_bound, hellinger_sq,
    marginal_bound, product_affinity_iid, AffinityResult, BoundComparison,
};
pub use density::{Density, Interval};
pub use error::{Error, Result};
pub use kraft::{phi_decide, psi_decide, Decision};
pub use model::{
    make_exponential_rate, make_normal_location, make_normal_variance_expansion,
    make_two_stage_normal, ConditionalFamily, ExpandedModel, MarginalFamily, ParamPoint,
    SimpleHypotheses,
};
pub use monte_carlo::{
    check_bound, estimate_phi_errors, estimate_psi_errors, sweep, BoundCheck, ErrorProbEstimate,
    SweepRow, SweepTarget,
};
pub use quadrature::QuadratureConfig;
