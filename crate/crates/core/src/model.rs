//! Density families of sufficient statistics and the expanded two-statistic model.
//!
//! An [`ExpandedModel`] pairs a marginal family for `t1` with a conditional
//! family for `t2 | t1`, both indexed by the parameter of interest `theta`
//! and the expansion parameter `eta`. At `eta = eta0` the marginal must
//! coincide with the original (unexpanded) family; [`ExpandedModel::verify_preservation`]
//! checks this numerically.

use std::fmt;
use std::sync::Arc;

use crate::density::Density;
use crate::error::{domain, Result};

/// A point `(theta, eta)` of the expanded parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint {
    pub theta: f64,
    pub eta: f64,
}

impl ParamPoint {
    pub fn new(theta: f64, eta: f64) -> Self {
        Self { theta, eta }
    }

    /// `(theta, eta0)` for the given family baseline.
    pub fn at_baseline(theta: f64, eta0: f64) -> Self {
        Self { theta, eta: eta0 }
    }
}

/// The simple-vs-simple pair `H0: theta = theta0` against `H1: theta = theta1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleHypotheses {
    theta0: f64,
    theta1: f64,
}

impl SimpleHypotheses {
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        if !theta0.is_finite() || !theta1.is_finite() {
            return Err(domain("hypothesis values must be finite"));
        }
        if theta0 == theta1 {
            return Err(domain(format!("theta0 and theta1 must differ, both are {theta0}")));
        }
        Ok(Self { theta0, theta1 })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    /// The same pair with the roles of H0 and H1 exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            theta0: self.theta1,
            theta1: self.theta0,
        }
    }
}

/// Family `(theta, eta) ↦ g(t1 | theta, eta)`.
pub trait MarginalFamily: Send + Sync + fmt::Debug {
    fn density_at(&self, p: ParamPoint) -> Result<Density>;

    /// Known baseline value of the expansion parameter.
    fn eta0(&self) -> f64;

    /// Density at `(theta, eta0)`.
    fn at(&self, theta: f64) -> Result<Density> {
        self.density_at(ParamPoint::at_baseline(theta, self.eta0()))
    }
}

/// Family `(t1, theta, eta) ↦ g̃(t2 | t1, theta, eta)`.
pub trait ConditionalFamily: Send + Sync + fmt::Debug {
    fn density_at(&self, t1: f64, p: ParamPoint) -> Result<Density>;
}

impl<T: MarginalFamily + ?Sized> MarginalFamily for Arc<T> {
    fn density_at(&self, p: ParamPoint) -> Result<Density> {
        (**self).density_at(p)
    }

    fn eta0(&self) -> f64 {
        (**self).eta0()
    }
}

/// `theta ↦ N(theta, sigma²)`; `eta` plays no role and `eta0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLocation {
    sigma: f64,
}

impl NormalLocation {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl MarginalFamily for NormalLocation {
    fn density_at(&self, p: ParamPoint) -> Result<Density> {
        Density::normal(p.theta, self.sigma)
    }

    fn eta0(&self) -> f64 {
        0.0
    }
}

pub fn make_normal_location(sigma: f64) -> Result<NormalLocation> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(NormalLocation { sigma })
}

/// `theta ↦ Exp(rate = theta)` on `[0, ∞)`; requires `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExponentialRate;

impl MarginalFamily for ExponentialRate {
    fn density_at(&self, p: ParamPoint) -> Result<Density> {
        if !(p.theta > 0.0) {
            return Err(domain(format!("exponential rate must be positive, got {}", p.theta)));
        }
        Density::exponential(p.theta)
    }

    fn eta0(&self) -> f64 {
        0.0
    }
}

pub fn make_exponential_rate() -> ExponentialRate {
    ExponentialRate
}

/// Sample mean of `n` draws from `N(theta, eta²)`: `N(theta, eta²/n)`, with `eta0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledNormalMean {
    n: usize,
}

impl MarginalFamily for ScaledNormalMean {
    fn density_at(&self, p: ParamPoint) -> Result<Density> {
        if !(p.eta > 0.0) {
            return Err(domain(format!("scale eta must be positive, got {}", p.eta)));
        }
        Density::normal(p.theta, p.eta / (self.n as f64).sqrt())
    }

    fn eta0(&self) -> f64 {
        1.0
    }
}

/// `t2 ~ N(theta, sigma²/n2)`, independent of `t1` and `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentNormalMean {
    sd: f64,
}

impl ConditionalFamily for IndependentNormalMean {
    fn density_at(&self, _t1: f64, p: ParamPoint) -> Result<Density> {
        Density::normal(p.theta, self.sd)
    }
}

/// Sample variance of `n` normal draws with scale `eta`:
/// `(n-1) S² / eta² ~ χ²(n-1)`, i.e. Gamma(shape (n-1)/2, scale 2 eta²/(n-1)).
/// Free of `theta` and of `t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleVariance {
    n: usize,
}

impl ConditionalFamily for SampleVariance {
    fn density_at(&self, _t1: f64, p: ParamPoint) -> Result<Density> {
        if !(p.eta > 0.0) {
            return Err(domain(format!("scale eta must be positive, got {}", p.eta)));
        }
        let df = (self.n - 1) as f64;
        Density::gamma(0.5 * df, 2.0 * p.eta * p.eta / df)
    }
}

/// Expanded model `h(t1, t2 | theta, eta) = g(t1 | theta, eta) · g̃(t2 | t1, theta, eta)`.
#[derive(Debug, Clone)]
pub struct ExpandedModel {
    marginal: Arc<dyn MarginalFamily>,
    original: Arc<dyn MarginalFamily>,
    conditional: Arc<dyn ConditionalFamily>,
    eta0: f64,
}

/// Outcome of [`ExpandedModel::verify_preservation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreservationCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

pub const PRESERVATION_TOL: f64 = 1e-9;

impl ExpandedModel {
    /// `original` is the unexpanded family `g(t1 | theta)` the marginal must reproduce at `eta0`.
    pub fn new(
        marginal: Arc<dyn MarginalFamily>,
        original: Arc<dyn MarginalFamily>,
        conditional: Arc<dyn ConditionalFamily>,
    ) -> Self {
        let eta0 = marginal.eta0();
        Self {
            marginal,
            original,
            conditional,
            eta0,
        }
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn marginal(&self) -> &dyn MarginalFamily {
        self.marginal.as_ref()
    }

    pub fn marginal_arc(&self) -> Arc<dyn MarginalFamily> {
        Arc::clone(&self.marginal)
    }

    pub fn original(&self) -> &dyn MarginalFamily {
        self.original.as_ref()
    }

    pub fn conditional(&self) -> &dyn ConditionalFamily {
        self.conditional.as_ref()
    }

    pub fn baseline(&self, theta: f64) -> ParamPoint {
        ParamPoint::at_baseline(theta, self.eta0)
    }

    /// `h(t1, t2 | p)`; zero when either factor is zero.
    pub fn joint_density(&self, t1: f64, t2: f64, p: ParamPoint) -> Result<f64> {
        let g = self.marginal.density_at(p)?.eval(t1);
        if g == 0.0 {
            return Ok(0.0);
        }
        let c = self.conditional.density_at(t1, p)?.eval(t2);
        Ok(if c == 0.0 { 0.0 } else { g * c })
    }

    /// `log h(t1, t2 | p)`, `-inf` off the joint support.
    pub fn joint_log_density(&self, t1: f64, t2: f64, p: ParamPoint) -> Result<f64> {
        let lg = self.marginal.density_at(p)?.log_eval(t1);
        if lg == f64::NEG_INFINITY {
            return Ok(lg);
        }
        Ok(lg + self.conditional.density_at(t1, p)?.log_eval(t2))
    }

    /// Compares the marginal at `(theta, eta0)` with the original family at `theta`.
    pub fn verify_preservation(&self, theta: f64, probes: &[f64]) -> Result<PreservationCheck> {
        let expanded = self.marginal.density_at(self.baseline(theta))?;
        let original = self.original.at(theta)?;
        let max_deviation = probes
            .iter()
            .map(|&t| (expanded.eval(t) - original.eval(t)).abs())
            .fold(0.0, f64::max);
        Ok(PreservationCheck {
            holds: max_deviation <= PRESERVATION_TOL,
            max_deviation,
        })
    }
}

fn check_count(name: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(domain(format!("{name} must be at least {min}, got {n}")));
    }
    Ok(())
}

/// Sample split into `n1` then `n2` iid `N(theta, sigma²)` draws:
/// `t1` is the first mean, `t2` the second, so the conditional depends on `theta`.
pub fn make_two_stage_normal(n1: usize, n2: usize, sigma: f64) -> Result<ExpandedModel> {
    check_count("n1", n1, 1)?;
    check_count("n2", n2, 1)?;
    let base = make_normal_location(sigma)?;
    let marginal = Arc::new(make_normal_location(base.sigma / (n1 as f64).sqrt())?);
    let conditional = Arc::new(IndependentNormalMean {
        sd: sigma / (n2 as f64).sqrt(),
    });
    Ok(ExpandedModel::new(marginal.clone(), marginal, conditional))
}

/// `n` iid `N(theta, eta²)` draws with `eta0 = 1`: `t1` the sample mean and
/// `t2` the sample variance, whose law is free of `theta`.
pub fn make_normal_variance_expansion(n: usize) -> Result<ExpandedModel> {
    check_count("n", n, 2)?;
    let marginal = Arc::new(ScaledNormalMean { n });
    let original = Arc::new(make_normal_location(1.0 / (n as f64).sqrt())?);
    let conditional = Arc::new(SampleVariance { n });
    Ok(ExpandedModel::new(marginal, original, conditional))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn normal_location_values() {
        let fam = make_normal_location(1.0).unwrap();
        let d = fam.at(0.0).unwrap();
        assert!((d.eval(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(d.eval(1.0), d.eval(-1.0));
        assert!(make_normal_location(0.0).is_err());
        assert!(make_normal_location(-1.0).is_err());
    }

    #[test]
    fn exponential_rate_domain() {
        let fam = make_exponential_rate();
        assert_eq!(fam.at(1.0).unwrap().eval(0.0), 1.0);
        assert_eq!(fam.at(2.0).unwrap().eval(-1.0), 0.0);
        assert!(fam.at(0.0).is_err());
        assert!(fam.at(-1.0).is_err());
    }

    #[test]
    fn hypotheses_must_differ() {
        assert!(SimpleHypotheses::new(1.0, 1.0).is_err());
        assert!(SimpleHypotheses::new(f64::NAN, 1.0).is_err());
        let h = SimpleHypotheses::new(0.0, 1.0).unwrap().swapped();
        assert_eq!((h.theta0(), h.theta1()), (1.0, 0.0));
    }

    #[test]
    fn two_stage_joint_is_product() {
        let em = make_two_stage_normal(1, 1, 1.0).unwrap();
        let p = em.baseline(0.0);
        let h = em.joint_density(0.0, 0.0, p).unwrap();
        assert!((h - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((h - 0.159_154_9).abs() < 1e-7);
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let h = em.joint_density(0.3, -1.2, p).unwrap();
        assert!((h - phi(0.3) * phi(-1.2)).abs() < 1e-15);
        let a = em.conditional().density_at(5.0, p).unwrap();
        let b = em.conditional().density_at(-5.0, p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_expansion_structure() {
        assert!(make_normal_variance_expansion(1).is_err());
        let em = make_normal_variance_expansion(4).unwrap();
        assert_eq!(em.eta0(), 1.0);
        let c0 = em.conditional().density_at(0.3, em.baseline(0.0)).unwrap();
        let c7 = em.conditional().density_at(0.3, em.baseline(7.0)).unwrap();
        for t in [0.1, 0.5, 1.0, 3.0] {
            assert_eq!(c0.eval(t), c7.eval(t));
        }
        // mean of 4 iid N(theta, 1) is N(theta, 1/4)
        let m = em.marginal().density_at(ParamPoint::new(2.0, 1.0)).unwrap();
        let oracle = |t: f64| (-0.5 * ((t - 2.0) / 0.5).powi(2)).exp() / (0.5 * (2.0 * PI).sqrt());
        for t in [1.0, 2.0, 2.7] {
            assert!((m.eval(t) - oracle(t)).abs() < 1e-14);
        }
        assert_eq!(em.joint_density(0.0, -0.5, em.baseline(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn preservation_holds_for_builtins() {
        let em = make_normal_variance_expansion(5).unwrap();
        let c = em.verify_preservation(0.0, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(c.holds);
        assert_eq!(c.max_deviation, 0.0);
        let em = make_two_stage_normal(2, 3, 1.5).unwrap();
        for theta in [-2.0, 0.0, 0.7] {
            assert!(em.verify_preservation(theta, &[-1.0, 0.0, 2.0]).unwrap().holds);
        }
    }

    /// Marginal whose baseline is shifted away from the original family.
    #[derive(Debug)]
    struct Corrupted;

    impl MarginalFamily for Corrupted {
        fn density_at(&self, p: ParamPoint) -> Result<Density> {
            Density::normal(p.theta + 0.1, 1.0)
        }
        fn eta0(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn preservation_detects_corruption() {
        let em = ExpandedModel::new(
            Arc::new(Corrupted),
            Arc::new(make_normal_location(1.0).unwrap()),
            Arc::new(IndependentNormalMean { sd: 1.0 }),
        );
        let c = em.verify_preservation(0.0, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(!c.holds);
        assert!(c.max_deviation > 1e-3);
    }
}
