//! Scalar densities of sufficient statistics.
//!
//! A [`Density`] is an immutable value: evaluation, log-evaluation, CDF and
//! seeded sampling are all pure functions of the density and their inputs.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Closed interval `[lower, upper]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn real_line() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Intersection, or `None` when it has no interior.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.min(other.upper);
        (lower < upper).then_some(Interval { lower, upper })
    }
}

/// Piecewise-linear density on a grid, normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
    /// Cumulative mass at each grid node; `cumulative[0] == 0`.
    cumulative: Vec<f64>,
}

impl Tabulated {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Density values at the grid nodes after renormalization.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, x: f64) -> usize {
        // index i with grid[i] <= x < grid[i+1], clamped to the last segment
        let i = self.grid.partition_point(|&g| g <= x);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if !(x >= self.grid[0] && x <= self.grid[n - 1]) {
            return 0.0;
        }
        let i = self.segment(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let w = (x - x0) / (x1 - x0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let i = self.segment(x);
        let s = x - self.grid[i];
        let h = self.grid[i + 1] - self.grid[i];
        let (a, b) = (self.values[i], self.values[i + 1]);
        self.cumulative[i] + a * s + (b - a) * s * s / (2.0 * h)
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.grid.len();
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(n - 2);
        let h = self.grid[i + 1] - self.grid[i];
        let (a, b) = (self.values[i], self.values[i + 1]);
        let rest = (u - self.cumulative[i]).max(0.0);
        if rest == 0.0 {
            return self.grid[i];
        }
        // solve a*s + (b-a) s^2 / (2h) = rest for s in [0, h]
        let disc = (a * a + 2.0 * (b - a) * rest / h).max(0.0);
        let denom = a + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rest / denom } else { h };
        self.grid[i] + s.min(h)
    }
}

/// A univariate probability density with finite or infinite support.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Normal { mean: f64, sd: f64 },
    /// Exponential with the given rate on `[0, ∞)`.
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Gamma with shape/scale parametrization on `[0, ∞)`.
    Gamma { shape: f64, scale: f64 },
    Tabulated(Arc<Tabulated>),
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(domain(format!("{name} must be finite, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl Density {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Ok(Density::Normal {
            mean: finite("mean", mean)?,
            sd: positive("standard deviation", sd)?,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Density::Exponential {
            rate: positive("rate", rate)?,
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        finite("lower", lower)?;
        finite("upper", upper)?;
        if lower >= upper {
            return Err(domain(format!("uniform needs lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Density::Uniform { lower, upper })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Ok(Density::Gamma {
            shape: positive("shape", shape)?,
            scale: positive("scale", scale)?,
        })
    }

    /// Piecewise-linear density through `(grid[i], values[i])`, rescaled to unit mass.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(domain(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(domain("a tabulated density needs at least two grid points"));
        }
        if grid.iter().any(|g| !g.is_finite()) {
            return Err(domain("grid points must be finite"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("grid must be strictly ascending"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain("tabulated values must be finite and nonnegative"));
        }
        let mass: f64 = grid
            .windows(2)
            .zip(values.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
            .sum();
        if mass <= 0.0 {
            return Err(domain("tabulated values have zero total mass"));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mass).collect();
        let mut cumulative = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..grid.len() - 1 {
            acc += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
            cumulative.push(acc);
        }
        Ok(Density::Tabulated(Arc::new(Tabulated {
            grid,
            values,
            cumulative,
        })))
    }

    /// Reads a two-column `grid,value` CSV. A non-numeric first row is treated as a header.
    pub fn tabulated_from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Io(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Io(format!(
                    "line {}: expected 2 columns, found {}",
                    line + 1,
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(g), Ok(v)) => {
                    grid.push(g);
                    values.push(v);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::Io(format!(
                        "line {}: could not parse numbers from {:?}",
                        line + 1,
                        record
                    )))
                }
            }
        }
        Self::tabulated(grid, values)
    }

    pub fn tabulated_from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::tabulated_from_csv(file)
    }

    pub fn support(&self) -> Interval {
        match self {
            Density::Normal { .. } => Interval::real_line(),
            Density::Exponential { .. } | Density::Gamma { .. } => {
                Interval::new(0.0, f64::INFINITY)
            }
            Density::Uniform { lower, upper } => Interval::new(*lower, *upper),
            Density::Tabulated(t) => Interval::new(t.grid[0], t.grid[t.grid.len() - 1]),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Density::Tabulated(t) => t.eval(x),
            Density::Uniform { lower, upper } => {
                if x >= *lower && x <= *upper {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            _ => self.log_eval(x).exp(),
        }
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn log_eval(&self, x: f64) -> f64 {
        if x.is_nan() || !self.support().contains(x) {
            return f64::NEG_INFINITY;
        }
        match self {
            Density::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Density::Exponential { rate } => rate.ln() - rate * x,
            Density::Uniform { lower, upper } => -(upper - lower).ln(),
            Density::Gamma { shape, scale } => {
                if x == 0.0 {
                    return if *shape < 1.0 {
                        f64::INFINITY
                    } else if *shape == 1.0 {
                        -scale.ln()
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(*shape) - shape * scale.ln()
            }
            Density::Tabulated(t) => t.eval(x).ln(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Density::Normal { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)),
            Density::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Density::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Density::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(*shape, x / scale)
                }
            }
            Density::Tabulated(t) => t.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Density::Normal { mean, .. } => *mean,
            Density::Exponential { rate } => 1.0 / rate,
            Density::Uniform { lower, upper } => 0.5 * (lower + upper),
            Density::Gamma { shape, scale } => shape * scale,
            Density::Tabulated(t) => t
                .grid
                .windows(2)
                .zip(t.values.windows(2))
                .map(|(g, v)| {
                    // exact first moment of the linear segment
                    let h = g[1] - g[0];
                    h * (v[0] * (2.0 * g[0] + g[1]) + v[1] * (g[0] + 2.0 * g[1])) / 6.0
                })
                .sum(),
        }
    }

    /// Points inside the support where the density's mass or shape changes
    /// character. Quadrature splits its domain here before adapting.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density::Normal { mean, sd } => [-12.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0]
                .iter()
                .map(|k| mean + k * sd)
                .collect(),
            Density::Exponential { rate } => {
                [0.5, 2.0, 6.0, 15.0, 40.0].iter().map(|k| k / rate).collect()
            }
            Density::Uniform { .. } => Vec::new(),
            Density::Gamma { shape, scale } => {
                let mean = shape * scale;
                let sd = shape.sqrt() * scale;
                let mut pts: Vec<f64> = [-3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0, 25.0]
                    .iter()
                    .map(|k| mean + k * sd)
                    .filter(|x| *x > 0.0)
                    .collect();
                pts.push(1e-3 * mean);
                pts
            }
            Density::Tabulated(t) => t.grid.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Density::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Density::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Density::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
            Density::Gamma { shape, scale } => Gamma::new(*shape, *scale)
                .expect("validated gamma parameters")
                .sample(rng),
            Density::Tabulated(t) => t.quantile(rng.random::<f64>()),
        }
    }

    /// One draw from a generator seeded with `seed`.
    pub fn sample_seeded(&self, seed: u64) -> f64 {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}
