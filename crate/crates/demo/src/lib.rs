//! Browser bindings. Each export returns a flat `Float64Array` the page plots.

use pxaug_core::survey::{compare_schemes, AccuracyModel, PopulationSpec, Scheme, Stratum};
use pxaug_core::{
    activation_measure, affinity, make_two_stage_normal, Density, QuadratureConfig,
    SimpleHypotheses,
};
use wasm_bindgen::prelude::*;

fn grid(max: f64, points: usize) -> impl Iterator<Item = f64> {
    let points = points.max(2);
    (0..points).map(move |i| max * i as f64 / (points - 1) as f64)
}

/// `[x0, ρ0, x1, ρ1, ...]`: affinity between two members of a family as
/// their separation grows. `family` is "normal" (shift of N(0, scale²)) or
/// "exponential" (rate 1 against rate 1 + x).
pub fn affinity_curve(family: &str, scale: f64, max_sep: f64, points: usize) -> pxaug_core::Result<Vec<f64>> {
    let cfg = QuadratureConfig::default();
    let mut out = Vec::with_capacity(2 * points);
    for x in grid(max_sep, points) {
        let (f, g) = match family {
            "exponential" => (Density::exponential(1.0)?, Density::exponential(1.0 + x)?),
            _ => (Density::normal(0.0, scale)?, Density::normal(x, scale)?),
        };
        out.push(x);
        out.push(affinity(&f, &g, &cfg)?.value);
    }
    Ok(out)
}

/// `[θ1, marginal, expanded, R, ...]` for the two-stage normal model at θ0 = 0.
pub fn activation_curve(n1: usize, n2: usize, sigma: f64, max_theta: f64, points: usize) -> pxaug_core::Result<Vec<f64>> {
    let cfg = QuadratureConfig::default();
    let em = make_two_stage_normal(n1, n2, sigma)?;
    let mut out = Vec::with_capacity(4 * points);
    // θ1 = θ0 is not a pair of hypotheses
    for t in grid(max_theta, points).skip(1) {
        let c = activation_measure(&em, &SimpleHypotheses::new(0.0, t)?, &cfg)?;
        out.extend([t, c.marginal_bound.value, c.expanded_bound.value, c.r_measure]);
    }
    Ok(out)
}

/// `[mean_error, rmse, std_error]` for naive, augmented and SRS, in that order.
/// Two equal strata with means 0 and `gap`.
#[allow(clippy::too_many_arguments)]
pub fn survey_comparison(
    gap: f64,
    prob_low: f64,
    prob_high: f64,
    p_accurate: f64,
    noise_sd: f64,
    quantile: f64,
    replications: usize,
    seed: u64,
) -> pxaug_core::Result<Vec<f64>> {
    let stratum = |label: &str, mean: f64| Stratum {
        label: label.into(),
        size: 300,
        value_mean: mean,
        value_sd: 1.0,
    };
    let spec = PopulationSpec {
        strata: vec![stratum("low", 0.0), stratum("high", gap)],
        attribute_prob_per_stratum: vec![prob_low, prob_high],
        seed,
    };
    let c = compare_schemes(&spec, &AccuracyModel::new(p_accurate, noise_sd)?, quantile, replications, seed)?;
    let mut out = Vec::with_capacity(9);
    for s in [Scheme::NaiveAttributeOnly, Scheme::Augmented, Scheme::SrsOracle] {
        let r = c.get(s).expect("every scheme is summarized");
        out.extend([r.mean_error, r.rmse, r.std_error]);
    }
    Ok(out)
}

fn js(e: pxaug_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = affinityCurve)]
pub fn affinity_curve_js(family: &str, scale: f64, max_sep: f64, points: usize) -> Result<Vec<f64>, JsError> {
    affinity_curve(family, scale, max_sep, points).map_err(js)
}

#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve_js(n1: usize, n2: usize, sigma: f64, max_theta: f64, points: usize) -> Result<Vec<f64>, JsError> {
    activation_curve(n1, n2, sigma, max_theta, points).map_err(js)
}

#[wasm_bindgen(js_name = surveyComparison)]
#[allow(clippy::too_many_arguments)]
pub fn survey_comparison_js(
    gap: f64,
    prob_low: f64,
    prob_high: f64,
    p_accurate: f64,
    noise_sd: f64,
    quantile: f64,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    survey_comparison(gap, prob_low, prob_high, p_accurate, noise_sd, quantile, replications, seed).map_err(js)
}
