//! Seeded Monte Carlo estimates of the two error probabilities of the Kraft
//! tests, and checks of those estimates against the affinity bounds.
//!
//! Replicate `i` under hypothesis `Hk` draws from its own generator keyed by
//! `(seed, k, i)`. Replicates run in parallel and only counts are reduced, so
//! estimates are bit-identical regardless of thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{expanded_bound, marginal_bound};
use crate::density::Density;
use crate::error::{domain, Result};
use crate::kraft::{phi_decide_with, psi_decide};
use crate::model::{ExpandedModel, MarginalFamily, SimpleHypotheses};
use crate::quadrature::QuadratureConfig;
use crate::seeding::{derive_seed, stream_rng};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.576;

pub const MIN_REPLICATES: usize = 100;

const STREAM_H0: u64 = 0;
const STREAM_H1: u64 = 1;
const STREAM_ROW: u64 = 0x5357_4545_50; // "SWEEP"

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorProbEstimate {
    /// Rejection rate under `H0`.
    pub alpha_hat: f64,
    /// Retention rate under `H1`.
    pub beta_hat: f64,
    pub replicates: usize,
    pub seed: u64,
    pub half_width_alpha: f64,
    pub half_width_beta: f64,
}

pub fn half_width(p: f64, replicates: usize) -> f64 {
    Z_99 * (p * (1.0 - p) / replicates as f64).sqrt()
}

impl ErrorProbEstimate {
    /// Builds an estimate from rates, filling in the 99% half-widths.
    pub fn from_rates(alpha_hat: f64, beta_hat: f64, replicates: usize, seed: u64) -> Self {
        Self {
            alpha_hat,
            beta_hat,
            replicates,
            seed,
            half_width_alpha: half_width(alpha_hat, replicates),
            half_width_beta: half_width(beta_hat, replicates),
        }
    }

    pub fn error_sum(&self) -> f64 {
        self.alpha_hat + self.beta_hat
    }

    pub fn combined_half_width(&self) -> f64 {
        self.half_width_alpha + self.half_width_beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub estimate: ErrorProbEstimate,
    pub bound: f64,
    pub satisfied: bool,
    /// `bound - (alpha_hat + beta_hat)`.
    pub slack: f64,
}

/// `alpha_hat + beta_hat <= bound + half_width_alpha + half_width_beta`.
pub fn check_bound(estimate: &ErrorProbEstimate, bound: f64) -> Result<BoundCheck> {
    check_bound_with_cushion(estimate, bound, 1.0)
}

/// As [`check_bound`] but allowing `cushion` combined half-widths of noise.
pub fn check_bound_with_cushion(
    estimate: &ErrorProbEstimate,
    bound: f64,
    cushion: f64,
) -> Result<BoundCheck> {
    if !(0.0..=1.0).contains(&bound) {
        return Err(domain(format!("bound must lie in [0, 1], got {bound}")));
    }
    let sum = estimate.error_sum();
    Ok(BoundCheck {
        estimate: *estimate,
        bound,
        satisfied: sum <= bound + cushion * estimate.combined_half_width(),
        slack: bound - sum,
    })
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(domain(format!(
            "at least {MIN_REPLICATES} replicates are required, got {replicates}"
        )));
    }
    Ok(())
}

/// Counts rejections under H0 and retentions under H1 over `replicates` pairs.
fn count_errors<F>(replicates: usize, seed: u64, decide: F) -> Result<(u64, u64)>
where
    F: Fn(u64, u64, usize) -> Result<bool> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64)> {
            let reject_under_h0 = decide(seed, STREAM_H0, i)?;
            let reject_under_h1 = decide(seed, STREAM_H1, i)?;
            Ok((reject_under_h0 as u64, (!reject_under_h1) as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
}

fn to_estimate(counts: (u64, u64), replicates: usize, seed: u64) -> ErrorProbEstimate {
    let n = replicates as f64;
    ErrorProbEstimate::from_rates(counts.0 as f64 / n, counts.1 as f64 / n, replicates, seed)
}

/// Error rates of the test on `t1` alone.
pub fn estimate_phi_errors(
    family: &dyn MarginalFamily,
    hyp: &SimpleHypotheses,
    replicates: usize,
    seed: u64,
) -> Result<ErrorProbEstimate> {
    check_replicates(replicates)?;
    let g0 = family.at(hyp.theta0())?;
    let g1 = family.at(hyp.theta1())?;
    let truth = |stream: u64| -> &Density { if stream == STREAM_H0 { &g0 } else { &g1 } };
    let counts = count_errors(replicates, seed, |seed, stream, i| {
        let mut rng = stream_rng(seed, stream, i as u64);
        let t1 = truth(stream).sample(&mut rng);
        Ok(phi_decide_with(t1, &g1, &g0)?.reject_h0)
    })?;
    Ok(to_estimate(counts, replicates, seed))
}

/// Error rates of the test on `(t1, t2)`; `t2` is drawn from the conditional given the drawn `t1`.
pub fn estimate_psi_errors(
    em: &ExpandedModel,
    hyp: &SimpleHypotheses,
    replicates: usize,
    seed: u64,
) -> Result<ErrorProbEstimate> {
    check_replicates(replicates)?;
    let p0 = em.baseline(hyp.theta0());
    let p1 = em.baseline(hyp.theta1());
    let g0 = em.marginal().density_at(p0)?;
    let g1 = em.marginal().density_at(p1)?;
    let counts = count_errors(replicates, seed, |seed, stream, i| {
        let (g, p) = if stream == STREAM_H0 { (&g0, p0) } else { (&g1, p1) };
        let mut rng = stream_rng(seed, stream, i as u64);
        let t1 = g.sample(&mut rng);
        let t2 = em.conditional().density_at(t1, p)?.sample(&mut rng);
        Ok(psi_decide(t1, t2, em, hyp)?.reject_h0)
    })?;
    Ok(to_estimate(counts, replicates, seed))
}

/// Which test a sweep runs.
#[derive(Debug, Clone, Copy)]
pub enum SweepTarget<'a> {
    Phi(&'a dyn MarginalFamily),
    Psi(&'a ExpandedModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta1: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub half_width_alpha: f64,
    pub half_width_beta: f64,
    pub bound: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl SweepRow {
    pub fn error_sum(&self) -> f64 {
        self.alpha_hat + self.beta_hat
    }
}

/// Seed used for the sweep row at `theta1`. Keyed on the value, not its
/// position, so reordering the list does not change any row.
pub fn sweep_row_seed(seed: u64, theta1: f64) -> u64 {
    derive_seed(seed, STREAM_ROW, theta1.to_bits())
}

/// One estimate and bound check per `theta1`, against a fixed `theta0`.
pub fn sweep(
    target: SweepTarget<'_>,
    theta0: f64,
    theta1_list: &[f64],
    replicates: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<Vec<SweepRow>> {
    if theta1_list.is_empty() {
        return Err(domain("theta1 list is empty"));
    }
    theta1_list
        .iter()
        .map(|&theta1| {
            let hyp = SimpleHypotheses::new(theta0, theta1)?;
            let row_seed = sweep_row_seed(seed, theta1);
            let (estimate, bound) = match target {
                SweepTarget::Phi(family) => (
                    estimate_phi_errors(family, &hyp, replicates, row_seed)?,
                    marginal_bound(family, &hyp, cfg)?,
                ),
                SweepTarget::Psi(em) => (
                    estimate_psi_errors(em, &hyp, replicates, row_seed)?,
                    expanded_bound(em, &hyp, cfg)?,
                ),
            };
            let check = check_bound(&estimate, bound.value)?;
            Ok(SweepRow {
                theta1,
                alpha_hat: estimate.alpha_hat,
                beta_hat: estimate.beta_hat,
                half_width_alpha: estimate.half_width_alpha,
                half_width_beta: estimate.half_width_beta,
                bound: check.bound,
                slack: check.slack,
                satisfied: check.satisfied,
            })
        })
        .collect()
}
