//! Hellinger affinity and the error-probability bounds built on it.
//!
//! For densities `f` and `g` the affinity is `ρ(f, g) = ∫ √(f g)` and the
//! squared Hellinger distance is `H² = 2 (1 - ρ)`. The affinity of the two
//! hypothesis densities of a sufficient statistic bounds the sum of the two
//! error probabilities of the Kraft test, so a smaller affinity means a
//! tighter bound. For an expanded model the joint affinity of `(t1, t2)` is
//! computed as an iterated integral, inner over `t2` at fixed `t1` and outer
//! over `t1`.

use std::cell::Cell;

use serde::Serialize;

use crate::density::{Density, Interval};
use crate::error::{Error, Result};
use crate::model::{ExpandedModel, MarginalFamily, SimpleHypotheses};
use crate::quadrature::{integrate, QuadratureConfig};

/// An affinity value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinityResult {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    /// Unclamped quadrature output.
    pub raw_value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl AffinityResult {
    fn from_raw(raw_value: f64, abs_error_estimate: f64, evaluations: usize) -> Self {
        Self {
            value: raw_value.clamp(0.0, 1.0),
            raw_value,
            abs_error_estimate,
            evaluations,
        }
    }

    fn zero() -> Self {
        Self::from_raw(0.0, 0.0, 0)
    }
}

/// Marginal bound, expanded bound and their difference `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundComparison {
    pub marginal_bound: AffinityResult,
    pub expanded_bound: AffinityResult,
    pub r_measure: f64,
    /// `r_measure` exceeds the two error estimates combined.
    pub strict: bool,
}

impl BoundComparison {
    pub fn combined_error(&self) -> f64 {
        self.marginal_bound.abs_error_estimate + self.expanded_bound.abs_error_estimate
    }
}

/// `√(f(x) g(x))` computed in log space; zero wherever either density is zero.
#[inline]
fn sqrt_product(f: &Density, g: &Density, x: f64) -> f64 {
    let lf = f.log_eval(x);
    let lg = g.log_eval(x);
    if lf == f64::NEG_INFINITY || lg == f64::NEG_INFINITY {
        0.0
    } else {
        (0.5 * (lf + lg)).exp()
    }
}

fn common_domain(f: &Density, g: &Density) -> Option<(Interval, Vec<f64>)> {
    let dom = f.support().intersect(&g.support())?;
    let mut breaks = f.breakpoints();
    breaks.extend(g.breakpoints());
    Some((dom, breaks))
}

/// `ρ(f, g) = ∫ √(f g)` over the intersection of the supports.
pub fn affinity(f: &Density, g: &Density, cfg: &QuadratureConfig) -> Result<AffinityResult> {
    cfg.validate()?;
    let Some((dom, breaks)) = common_domain(f, g) else {
        return Ok(AffinityResult::zero());
    };
    let r = integrate(|x| sqrt_product(f, g, x), dom.lower, dom.upper, &breaks, cfg)?;
    Ok(AffinityResult::from_raw(r.value, r.abs_error, r.evaluations))
}

/// `H²(f, g) = 2 (1 - ρ(f, g))`, in `[0, 2]`.
pub fn hellinger_sq(f: &Density, g: &Density, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(hellinger_sq_from_affinity(affinity(f, g, cfg)?.value))
}

pub fn hellinger_sq_from_affinity(rho: f64) -> f64 {
    2.0 * (1.0 - rho)
}

/// Affinity of `g(·|theta1)` and `g(·|theta0)` at the family baseline: the
/// upper bound on the error sum of the Kraft test on `t1` alone.
pub fn marginal_bound(
    family: &dyn MarginalFamily,
    hyp: &SimpleHypotheses,
    cfg: &QuadratureConfig,
) -> Result<AffinityResult> {
    let g1 = family.at(hyp.theta1())?;
    let g0 = family.at(hyp.theta0())?;
    affinity(&g1, &g0, cfg)
}

/// Affinity of the two conditional densities of `t2` at a fixed `t1`.
pub fn conditional_affinity(
    em: &ExpandedModel,
    hyp: &SimpleHypotheses,
    t1: f64,
    cfg: &QuadratureConfig,
) -> Result<AffinityResult> {
    let c1 = em.conditional().density_at(t1, em.baseline(hyp.theta1()))?;
    let c0 = em.conditional().density_at(t1, em.baseline(hyp.theta0()))?;
    affinity(&c1, &c0, cfg)
}

/// Joint affinity of `h(·,·|theta1, eta0)` and `h(·,·|theta0, eta0)` by iterated
/// quadrature: the error-sum bound of the test that also uses `t2`.
///
/// Inner integrals run at one tenth of the outer tolerances. The reported
/// error adds the largest inner error estimate to the outer one, since the
/// outer weight `√(g1 g0)` integrates to at most 1.
pub fn expanded_bound(
    em: &ExpandedModel,
    hyp: &SimpleHypotheses,
    cfg: &QuadratureConfig,
) -> Result<AffinityResult> {
    cfg.validate()?;
    let p1 = em.baseline(hyp.theta1());
    let p0 = em.baseline(hyp.theta0());
    let g1 = em.marginal().density_at(p1)?;
    let g0 = em.marginal().density_at(p0)?;
    let Some((dom, breaks)) = common_domain(&g1, &g0) else {
        return Ok(AffinityResult::zero());
    };

    let inner_cfg = cfg.tightened(0.1);
    let inner_evals = Cell::new(0usize);
    let inner_max_err = Cell::new(0.0f64);
    let failure: Cell<Option<Error>> = Cell::new(None);

    let outer = |t1: f64| -> f64 {
        let w = sqrt_product(&g1, &g0, t1);
        if w == 0.0 {
            return 0.0;
        }
        let inner = em
            .conditional()
            .density_at(t1, p1)
            .and_then(|c1| {
                let c0 = em.conditional().density_at(t1, p0)?;
                affinity(&c1, &c0, &inner_cfg)
            });
        match inner {
            Ok(r) => {
                inner_evals.set(inner_evals.get() + r.evaluations);
                inner_max_err.set(inner_max_err.get().max(r.abs_error_estimate));
                w * r.raw_value
            }
            Err(e) => {
                let first = failure.take().unwrap_or(e);
                failure.set(Some(first));
                0.0
            }
        }
    };

    let r = integrate(outer, dom.lower, dom.upper, &breaks, cfg);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let r = r?;
    Ok(AffinityResult::from_raw(
        r.value,
        r.abs_error + inner_max_err.get(),
        r.evaluations + inner_evals.get(),
    ))
}

/// The activation measure `R` = marginal bound − expanded bound.
pub fn activation_measure(
    em: &ExpandedModel,
    hyp: &SimpleHypotheses,
    cfg: &QuadratureConfig,
) -> Result<BoundComparison> {
    let marginal = marginal_bound(em.original(), hyp, cfg)?;
    let expanded = expanded_bound(em, hyp, cfg)?;
    let r_measure = marginal.raw_value - expanded.raw_value;
    let strict = r_measure > marginal.abs_error_estimate + expanded.abs_error_estimate;
    Ok(BoundComparison {
        marginal_bound: marginal,
        expanded_bound: expanded,
        r_measure,
        strict,
    })
}

/// Affinity of the `n`-fold iid products, `ρ(f, g)ⁿ`.
pub fn product_affinity_iid(
    f: &Density,
    g: &Density,
    n: u32,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if n == 0 {
        return Err(crate::error::domain("n must be at least 1"));
    }
    Ok(affinity(f, g, cfg)?.value.powi(n as i32))
}

/// `∫ f` by quadrature over the support of `f`.
pub fn total_mass(f: &Density, cfg: &QuadratureConfig) -> Result<f64> {
    let s = f.support();
    Ok(integrate(|x| f.eval(x), s.lower, s.upper, &f.breakpoints(), cfg)?.value)
}
