//! Kraft's test of two simple hypotheses on a sufficient statistic.
//!
//! The test rejects `H0` when `√g(t|θ1) / √g(t|θ0) > 1`. Decisions are made
//! on the half log-ratio, which has the same sign and never overflows.

use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::model::{ExpandedModel, MarginalFamily, SimpleHypotheses};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub reject_h0: bool,
    /// `(log g1 - log g0) / 2`; `±inf` when exactly one density vanishes.
    pub log_ratio: f64,
}

/// Decision from the log-densities under `H1` and `H0`. A tie retains `H0`.
pub fn decide_from_log_densities(log_h1: f64, log_h0: f64, at: f64) -> Result<Decision> {
    let log_ratio = match (log_h1 == f64::NEG_INFINITY, log_h0 == f64::NEG_INFINITY) {
        (true, true) => return Err(Error::OutsideSupport(at)),
        (false, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        (false, false) => 0.5 * (log_h1 - log_h0),
    };
    Ok(Decision {
        reject_h0: log_ratio > 0.0,
        log_ratio,
    })
}

/// The test on `t1` with both hypothesis densities already built.
pub fn phi_decide_with(t1: f64, g1: &Density, g0: &Density) -> Result<Decision> {
    decide_from_log_densities(g1.log_eval(t1), g0.log_eval(t1), t1)
}

/// The test on `t1` alone.
pub fn phi_decide(t1: f64, family: &dyn MarginalFamily, hyp: &SimpleHypotheses) -> Result<Decision> {
    let g1 = family.at(hyp.theta1())?;
    let g0 = family.at(hyp.theta0())?;
    phi_decide_with(t1, &g1, &g0)
}

/// The test on `(t1, t2)` using the joint density at `eta0`.
pub fn psi_decide(t1: f64, t2: f64, em: &ExpandedModel, hyp: &SimpleHypotheses) -> Result<Decision> {
    let l1 = em.joint_log_density(t1, t2, em.baseline(hyp.theta1()))?;
    let l0 = em.joint_log_density(t1, t2, em.baseline(hyp.theta0()))?;
    decide_from_log_densities(l1, l0, t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_exponential_rate, make_normal_location, make_normal_variance_expansion, make_two_stage_normal};
    use proptest::prelude::*;

    fn h01() -> SimpleHypotheses {
        SimpleHypotheses::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn phi_normal_midpoint() {
        let fam = make_normal_location(1.0).unwrap();
        assert!(phi_decide(0.6, &fam, &h01()).unwrap().reject_h0);
        let tie = phi_decide(0.5, &fam, &h01()).unwrap();
        assert_eq!(tie.log_ratio, 0.0);
        assert!(!tie.reject_h0);
        assert!(!phi_decide(0.4, &fam, &h01()).unwrap().reject_h0);
        // oracle: direct log-pdf comparison, (t-0)^2/2 - (t-1)^2/2 halved
        let d = phi_decide(0.6, &fam, &h01()).unwrap();
        assert!((d.log_ratio - 0.5 * (0.5 * 0.36 - 0.5 * 0.16)).abs() < 1e-15);
    }

    #[test]
    fn psi_two_stage_sum_rule() {
        let em = make_two_stage_normal(1, 1, 1.0).unwrap();
        assert!(psi_decide(0.3, 0.8, &em, &h01()).unwrap().reject_h0);
        let tie = psi_decide(0.6, 0.4, &em, &h01()).unwrap();
        assert!(!tie.reject_h0);
        assert!(tie.log_ratio.abs() < 1e-15);
        assert!(!psi_decide(0.2, 0.3, &em, &h01()).unwrap().reject_h0);
    }

    #[test]
    fn one_sided_supports() {
        let u0 = Density::uniform(0.0, 1.0).unwrap();
        let u1 = Density::uniform(0.5, 2.0).unwrap();
        let d = phi_decide_with(1.5, &u1, &u0).unwrap();
        assert!(d.reject_h0 && d.log_ratio == f64::INFINITY);
        let d = phi_decide_with(0.2, &u1, &u0).unwrap();
        assert!(!d.reject_h0 && d.log_ratio == f64::NEG_INFINITY);
        assert_eq!(phi_decide_with(3.0, &u1, &u0), Err(Error::OutsideSupport(3.0)));
    }

    #[test]
    fn exponential_outside_both() {
        let h = SimpleHypotheses::new(1.0, 2.0).unwrap();
        assert!(phi_decide(-1.0, &make_exponential_rate(), &h).is_err());
    }

    #[test]
    fn variance_expansion_collapses_to_phi() {
        let em = make_normal_variance_expansion(5).unwrap();
        let hyp = SimpleHypotheses::new(-0.3, 0.8).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let t1 = -2.0 + 0.45 * i as f64;
                let t2 = 0.05 + 0.4 * j as f64;
                let psi = psi_decide(t1, t2, &em, &hyp).unwrap();
                let phi = phi_decide(t1, em.original(), &hyp).unwrap();
                assert_eq!(psi.reject_h0, phi.reject_h0, "t1={t1} t2={t2}");
            }
        }
    }

    proptest! {
        #[test]
        fn swap_negates_log_ratio(t in -5.0f64..5.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!(a != b);
            let fam = make_normal_location(1.3).unwrap();
            let h = SimpleHypotheses::new(a, b).unwrap();
            let d = phi_decide(t, &fam, &h).unwrap();
            let s = phi_decide(t, &fam, &h.swapped()).unwrap();
            prop_assert!((d.log_ratio + s.log_ratio).abs() <= 1e-12 * (1.0 + d.log_ratio.abs()));
        }

        #[test]
        fn common_scale_leaves_decision(l1 in -50.0f64..50.0, l0 in -50.0f64..50.0, c in 1e-6f64..1e6) {
            let d = decide_from_log_densities(l1, l0, 0.0).unwrap();
            let s = decide_from_log_densities(l1 + c.ln(), l0 + c.ln(), 0.0).unwrap();
            prop_assert_eq!(d.reject_h0, s.reject_h0);
        }
    }
}
