//! Collected-data augmentation on a simulated stratified population.
//!
//! Units holding the attribute are the (non-representative) respondents.
//! Each respondent is paired with one non-holder in its own stratum and
//! reports that unit's value, exactly with probability `p_accurate` and with
//! Gaussian corruption otherwise. Respondent self-reports plus the most
//! accurate proxy reports are combined into a post-stratified mean and
//! compared with the respondents-only mean and a simple random sample.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::seeding::{derive_seed, stream_rng};

const STREAM_UNIT: u64 = 1;
const STREAM_PAIR: u64 = 2;
const STREAM_PROXY: u64 = 3;
const STREAM_SRS: u64 = 4;
const STREAM_REPLICATION: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stratum {
    pub label: String,
    pub size: usize,
    pub value_mean: f64,
    pub value_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub strata: Vec<Stratum>,
    pub attribute_prob_per_stratum: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(domain("population needs at least one stratum"));
        }
        if self.attribute_prob_per_stratum.len() != self.strata.len() {
            return Err(domain(format!(
                "{} strata but {} attribute probabilities",
                self.strata.len(),
                self.attribute_prob_per_stratum.len()
            )));
        }
        for s in &self.strata {
            if s.size == 0 {
                return Err(domain(format!("stratum {:?} has size 0", s.label)));
            }
            if !s.value_mean.is_finite() || !(s.value_sd.is_finite() && s.value_sd >= 0.0) {
                return Err(domain(format!("stratum {:?} has invalid value parameters", s.label)));
            }
        }
        if let Some(p) = self
            .attribute_prob_per_stratum
            .iter()
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return Err(domain(format!("attribute probability {p} outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unit {
    pub id: usize,
    /// Index into [`Population::strata`].
    pub stratum: usize,
    pub true_value: f64,
    pub has_attribute: bool,
    /// For attribute holders: the paired non-holder in the same stratum.
    pub associate_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub strata: Vec<Stratum>,
    pub units: Vec<Unit>,
    /// Per stratum, attribute holders left without an associate.
    pub pairing_shortfall: Vec<usize>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.units.iter().map(|u| u.true_value).sum::<f64>() / self.units.len() as f64
    }

    pub fn respondents(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(|u| u.has_attribute)
    }

    pub fn stratum_label(&self, unit: &Unit) -> &str {
        &self.strata[unit.stratum].label
    }
}

pub fn generate_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let mut units = Vec::with_capacity(spec.strata.iter().map(|s| s.size).sum());
    let mut pairing_shortfall = Vec::with_capacity(spec.strata.len());

    for (h, (stratum, &prob)) in spec
        .strata
        .iter()
        .zip(&spec.attribute_prob_per_stratum)
        .enumerate()
    {
        let first = units.len();
        for id in first..first + stratum.size {
            let mut rng = stream_rng(spec.seed, STREAM_UNIT, id as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            units.push(Unit {
                id,
                stratum: h,
                true_value: stratum.value_mean + stratum.value_sd * z,
                has_attribute: rng.random::<f64>() < prob,
                associate_id: None,
            });
        }

        let block = &mut units[first..];
        let holders: Vec<usize> = block.iter().filter(|u| u.has_attribute).map(|u| u.id).collect();
        let mut others: Vec<usize> = block.iter().filter(|u| !u.has_attribute).map(|u| u.id).collect();
        others.shuffle(&mut stream_rng(spec.seed, STREAM_PAIR, h as u64));
        for (&holder, &other) in holders.iter().zip(&others) {
            block[holder - first].associate_id = Some(other);
        }
        pairing_shortfall.push(holders.len().saturating_sub(others.len()));
    }

    Ok(Population {
        strata: spec.strata.clone(),
        units,
        pairing_shortfall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyModel {
    pub p_accurate: f64,
    pub noise_sd: f64,
}

impl AccuracyModel {
    pub fn new(p_accurate: f64, noise_sd: f64) -> Result<Self> {
        let m = Self { p_accurate, noise_sd };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_accurate) {
            return Err(domain(format!("p_accurate {} outside [0, 1]", self.p_accurate)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(domain(format!("noise_sd must be nonnegative, got {}", self.noise_sd)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxyResponse {
    pub respondent_id: usize,
    pub target_id: usize,
    pub reported_value: f64,
    /// 1 for exact reports, `exp(-|corruption| / noise_sd)` otherwise.
    pub accuracy_score: f64,
}

/// One report per paired respondent about its associate.
pub fn collect_proxy_responses(
    pop: &Population,
    acc: &AccuracyModel,
    seed: u64,
) -> Result<Vec<ProxyResponse>> {
    acc.validate()?;
    Ok(pop
        .respondents()
        .filter_map(|r| r.associate_id.map(|t| (r.id, t)))
        .map(|(respondent_id, target_id)| {
            let mut rng = stream_rng(seed, STREAM_PROXY, respondent_id as u64);
            let truth = pop.units[target_id].true_value;
            let exact = rng.random::<f64>() < acc.p_accurate;
            let corruption = if exact {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc.noise_sd * z
            };
            let accuracy_score = if corruption == 0.0 {
                1.0
            } else {
                (-corruption.abs() / acc.noise_sd).exp()
            };
            ProxyResponse {
                respondent_id,
                target_id,
                reported_value: truth + corruption,
                accuracy_score,
            }
        })
        .collect())
}

/// Keeps the `quantile` fraction with the highest accuracy scores.
///
/// The cut is the score of the `ceil(quantile · n)`-th best response; every
/// response scoring at least that much is kept, so ties at the cut survive.
/// Input order is preserved.
pub fn filter_most_accurate(responses: &[ProxyResponse], quantile: f64) -> Result<Vec<ProxyResponse>> {
    if responses.is_empty() {
        return Err(Error::NoData("no proxy responses to filter".into()));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(domain(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    let mut scores: Vec<f64> = responses.iter().map(|r| r.accuracy_score).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let keep = ((quantile * scores.len() as f64).ceil() as usize).clamp(1, scores.len());
    let cut = scores[keep - 1];
    Ok(responses
        .iter()
        .filter(|r| r.accuracy_score >= cut)
        .copied()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NaiveAttributeOnly,
    Augmented,
    SrsOracle,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::NaiveAttributeOnly, Scheme::Augmented, Scheme::SrsOracle];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NaiveAttributeOnly => "naive_attribute_only",
            Scheme::Augmented => "augmented",
            Scheme::SrsOracle => "srs_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub scheme: Scheme,
    pub estimate: f64,
    pub n_used: usize,
    pub true_population_mean: f64,
    pub error: f64,
    /// Strata contributing data (always all of them for the SRS benchmark).
    pub strata_covered: usize,
}

/// Estimates the population mean with one scheme.
///
/// `augmented` averages self-reports and proxy reports within each stratum
/// and weights strata by their population shares, renormalized over the
/// strata that have data. `srs_size` and `seed` only matter for `srs_oracle`.
pub fn estimate_mean(
    pop: &Population,
    responses: &[ProxyResponse],
    scheme: Scheme,
    srs_size: usize,
    seed: u64,
) -> Result<EstimateReport> {
    let truth = pop.mean();
    let report = |estimate: f64, n_used: usize, strata_covered: usize| EstimateReport {
        scheme,
        estimate,
        n_used,
        true_population_mean: truth,
        error: estimate - truth,
        strata_covered,
    };
    match scheme {
        Scheme::NaiveAttributeOnly => {
            let (sum, n) = pop
                .respondents()
                .fold((0.0, 0usize), |(s, n), u| (s + u.true_value, n + 1));
            if n == 0 {
                return Err(Error::NoData("no respondents hold the attribute".into()));
            }
            let covered = pop.strata.len()
                - (0..pop.strata.len())
                    .filter(|&h| !pop.respondents().any(|u| u.stratum == h))
                    .count();
            Ok(report(sum / n as f64, n, covered))
        }
        Scheme::Augmented => {
            let k = pop.strata.len();
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for u in pop.respondents() {
                sums[u.stratum] += u.true_value;
                counts[u.stratum] += 1;
            }
            for r in responses {
                let target = pop
                    .units
                    .get(r.target_id)
                    .ok_or_else(|| domain(format!("proxy target {} not in population", r.target_id)))?;
                sums[target.stratum] += r.reported_value;
                counts[target.stratum] += 1;
            }
            let mut weighted = 0.0;
            let mut weight = 0.0;
            let mut covered = 0;
            for h in 0..k {
                if counts[h] > 0 {
                    let share = pop.strata[h].size as f64;
                    weighted += share * sums[h] / counts[h] as f64;
                    weight += share;
                    covered += 1;
                }
            }
            if covered == 0 {
                return Err(Error::NoData("no respondents or proxy reports".into()));
            }
            Ok(report(weighted / weight, counts.iter().sum(), covered))
        }
        Scheme::SrsOracle => {
            if srs_size == 0 || srs_size > pop.len() {
                return Err(domain(format!(
                    "srs_size must lie in 1..={}, got {srs_size}",
                    pop.len()
                )));
            }
            let mut rng = stream_rng(seed, STREAM_SRS, 0);
            let mut picked = index::sample(&mut rng, pop.len(), srs_size).into_vec();
            // sum in id order so a census reproduces the population mean bit-for-bit
            picked.sort_unstable();
            let sum: f64 = picked.iter().map(|&i| pop.units[i].true_value).sum();
            Ok(report(sum / srs_size as f64, srs_size, pop.strata.len()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub mean_error: f64,
    pub rmse: f64,
    /// Standard error of `mean_error` across replications.
    pub std_error: f64,
    /// Replications where the scheme had usable data.
    pub replications_used: usize,
    /// Fraction of used replications in which every stratum contributed data.
    pub full_coverage_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeComparison {
    pub rows: Vec<SchemeSummary>,
    pub replications: usize,
    pub seed: u64,
}

impl SchemeComparison {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }
}

/// Per-replication results; `None` where a scheme had no usable data.
type Replication = [Option<EstimateReport>; 3];

fn replicate(
    spec: &PopulationSpec,
    acc: &AccuracyModel,
    quantile: f64,
    seed: u64,
    r: u64,
) -> Result<Replication> {
    let mut spec = spec.clone();
    spec.seed = derive_seed(seed, STREAM_REPLICATION, 3 * r);
    let pop = generate_population(&spec)?;
    let proxies = collect_proxy_responses(&pop, acc, derive_seed(seed, STREAM_REPLICATION, 3 * r + 1))?;
    let kept = if proxies.is_empty() {
        proxies
    } else {
        filter_most_accurate(&proxies, quantile)?
    };
    let naive = estimate_mean(&pop, &kept, Scheme::NaiveAttributeOnly, 0, 0).ok();
    let augmented = estimate_mean(&pop, &kept, Scheme::Augmented, 0, 0).ok();
    // the benchmark sample matches the augmented scheme's data volume
    let srs_size = augmented.map_or(1, |a| a.n_used.clamp(1, pop.len()));
    let srs = estimate_mean(
        &pop,
        &kept,
        Scheme::SrsOracle,
        srs_size,
        derive_seed(seed, STREAM_REPLICATION, 3 * r + 2),
    )
    .ok();
    Ok([naive, augmented, srs])
}

/// Replicated end-to-end simulation comparing the three schemes.
pub fn compare_schemes(
    spec: &PopulationSpec,
    acc: &AccuracyModel,
    quantile: f64,
    replications: usize,
    seed: u64,
) -> Result<SchemeComparison> {
    spec.validate()?;
    acc.validate()?;
    if replications < 10 {
        return Err(domain(format!("at least 10 replications are required, got {replications}")));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(domain(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    let runs: Vec<Replication> = (0..replications as u64)
        .into_par_iter()
        .map(|r| replicate(spec, acc, quantile, seed, r))
        .collect::<Result<_>>()?;

    let n_strata = spec.strata.len();
    let rows = Scheme::ALL
        .iter()
        .enumerate()
        .map(|(k, &scheme)| {
            let reports: Vec<&EstimateReport> = runs.iter().filter_map(|run| run[k].as_ref()).collect();
            let n = reports.len();
            if n == 0 {
                return SchemeSummary {
                    scheme,
                    mean_error: f64::NAN,
                    rmse: f64::NAN,
                    std_error: f64::NAN,
                    replications_used: 0,
                    full_coverage_rate: 0.0,
                };
            }
            let nf = n as f64;
            let mean_error = reports.iter().map(|r| r.error).sum::<f64>() / nf;
            let mse = reports.iter().map(|r| r.error * r.error).sum::<f64>() / nf;
            let var = if n > 1 {
                reports.iter().map(|r| (r.error - mean_error).powi(2)).sum::<f64>() / (nf - 1.0)
            } else {
                0.0
            };
            let full = reports.iter().filter(|r| r.strata_covered == n_strata).count();
            SchemeSummary {
                scheme,
                mean_error,
                rmse: mse.sqrt(),
                std_error: (var / nf).sqrt(),
                replications_used: n,
                full_coverage_rate: full as f64 / nf,
            }
        })
        .collect();

    Ok(SchemeComparison {
        rows,
        replications,
        seed,
    })
}
