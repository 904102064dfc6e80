//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! The domain is first cut at caller-supplied breakpoints. Every piece with an
//! infinite end is mapped onto a finite interval by a rational substitution
//! (`x = a + (1 - t)/t` and its mirror), and then all pieces share one
//! priority queue: the panel with the largest error estimate is bisected
//! until the total error meets `max(abs_tol, rel_tol * |I|)`.
//!
//! Panels are processed in a fixed order, so the result is a deterministic
//! function of the integrand and the configuration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerances and budget for one integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evaluations: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_evaluations: 1_000_000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_evaluations < 100 {
            return Err(domain(format!(
                "max_evaluations must be at least 100, got {}",
                self.max_evaluations
            )));
        }
        Ok(())
    }

    /// Tolerances scaled by `factor`, same budget.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_evaluations: self.max_evaluations,
        }
    }
}

/// Value of an integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const POINTS_PER_PANEL: usize = 15;

/// How a piece of the original domain is parametrized.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Finite,
    /// `[a, ∞)` through `x = a + (1 - t)/t`, `t ∈ (0, 1]`.
    UpperTail(f64),
    /// `(-∞, b]` through `x = b - (1 - t)/t`, `t ∈ (0, 1]`.
    LowerTail(f64),
}

impl Piece {
    #[inline]
    fn map<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            Piece::Finite => f(t),
            Piece::UpperTail(a) => {
                let x = a + (1.0 - t) / t;
                let y = f(x);
                if y == 0.0 {
                    0.0
                } else {
                    y / (t * t)
                }
            }
            Piece::LowerTail(b) => {
                let x = b - (1.0 - t) / t;
                let y = f(x);
                if y == 0.0 {
                    0.0
                } else {
                    y / (t * t)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lower: f64,
    upper: f64,
    piece: Piece,
    value: f64,
    error: f64,
    /// Insertion sequence, used to break error ties deterministically.
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One 15-point Gauss–Kronrod panel: (value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, piece: Piece, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = piece.map(f, center);
    let mut res_g = f_center * WG[3];
    let mut res_k = f_center * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = piece.map(f, center - dx);
        let f2 = piece.map(f, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * half.abs(), res_asc * half.abs());
    (value, err)
}

/// Integrates `f` over `[lower, upper]` (either end may be infinite), first
/// splitting the domain at every breakpoint that falls strictly inside it.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    cfg.validate()?;
    if lower.is_nan() || upper.is_nan() {
        return Err(domain("integration limits must not be NaN"));
    }
    if lower >= upper {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lower && *x < upper)
        .collect();
    if lower.is_infinite() && upper.is_infinite() && cuts.is_empty() {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lower);
    edges.extend(cuts);
    edges.push(upper);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut evaluations = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    // panels too narrow to bisect further keep contributing here
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;

    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (piece, ta, tb) = if a.is_infinite() {
            (Piece::LowerTail(b), 0.0, 1.0)
        } else if b.is_infinite() {
            (Piece::UpperTail(a), 0.0, 1.0)
        } else {
            (Piece::Finite, a, b)
        };
        let (value, error) = gk15(&f, piece, ta, tb);
        evaluations += POINTS_PER_PANEL;
        total += value;
        total_err += error;
        heap.push(Panel {
            lower: ta,
            upper: tb,
            piece,
            value,
            error,
            seq,
        });
        seq += 1;
    }

    loop {
        let sum = total + frozen_value;
        let err = total_err + frozen_err;
        if !sum.is_finite() || !err.is_finite() {
            return Err(Error::QuadratureBudget {
                estimate: sum,
                abs_error: f64::INFINITY,
                evaluations,
            });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * sum.abs());
        if err <= tol {
            return Ok(Integral {
                value: sum,
                abs_error: err,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::QuadratureBudget {
                estimate: sum,
                abs_error: err,
                evaluations,
            });
        };
        if evaluations + 2 * POINTS_PER_PANEL > cfg.max_evaluations {
            return Err(Error::QuadratureBudget {
                estimate: sum,
                abs_error: err,
                evaluations,
            });
        }
        let mid = 0.5 * (worst.lower + worst.upper);
        let width = worst.upper - worst.lower;
        let scale = worst.lower.abs().max(worst.upper.abs()).max(f64::MIN_POSITIVE);
        if !(mid > worst.lower && mid < worst.upper) || width <= 1e3 * f64::EPSILON * scale {
            total -= worst.value;
            total_err -= worst.error;
            frozen_value += worst.value;
            frozen_err += worst.error;
            continue;
        }
        let (v1, e1) = gk15(&f, worst.piece, worst.lower, mid);
        let (v2, e2) = gk15(&f, worst.piece, mid, worst.upper);
        evaluations += 2 * POINTS_PER_PANEL;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        if total_err < 0.0 {
            // cancellation drift in the running sum
            total_err = heap.iter().map(|p| p.error).sum::<f64>() + e1 + e2;
        }
        for (lo, hi, value, error) in [(worst.lower, mid, v1, e1), (mid, worst.upper, v2, e2)] {
            heap.push(Panel {
                lower: lo,
                upper: hi,
                piece: worst.piece,
                value,
                error,
                seq,
            });
            seq += 1;
        }
    }
}
