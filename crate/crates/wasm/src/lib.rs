//! Browser bindings for the closed-form calculators: effective-region
//! radius, BBP overlap curve and the convergence bound curve. Every export
//! returns a JSON string; errors come back as a thrown string.
//!
//! The `*_json` functions are plain Rust so they can be tested natively.

use std::collections::BTreeMap;

use serde_json::json;
use wasm_bindgen::prelude::*;
use w2sg_core::activations::{gaussian_moments, make_activation};
use w2sg_core::landscape::{radius_report, theory_bound};
use w2sg_core::spectral::bbp_overlap;
use w2sg_core::spiked::sigma_z_sq;

fn to_string<T: serde::Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Radius from explicit constants.
pub fn radius_json(mu0: f64, m1: f64, m2: f64, m3: f64, lambda: f64) -> Result<String, String> {
    let r = radius_report(mu0, m1, m2, m3, lambda).map_err(|e| e.to_string())?;
    to_string(&r)
}

/// Radius for a library activation, with `μ₀` computed at `σ_z² = 1 + λρ²`.
pub fn activation_radius_json(name: &str, rho: f64, lambda: f64) -> Result<String, String> {
    let s2 = sigma_z_sq(lambda, rho);
    let params = BTreeMap::from([("sigma_z_sq".to_string(), s2)]);
    let spec = make_activation(name, &params).map_err(|e| e.to_string())?;
    let m = gaussian_moments(&spec, s2).map_err(|e| e.to_string())?;
    let r = radius_report(m.mu0, spec.m1, spec.m2, spec.m3, lambda).map_err(|e| e.to_string())?;
    to_string(&json!({ "moments": m, "report": r }))
}

/// Predicted overlap on `n` evenly spaced λ in `[0, lambda_max]`.
pub fn bbp_curve_json(alpha: f64, lambda_max: f64, n: usize) -> Result<String, String> {
    if !(alpha > 0.0) || !(lambda_max > 0.0) || n < 2 {
        return Err("need alpha > 0, lambda_max > 0 and n >= 2".into());
    }
    let lambda: Vec<f64> = (0..n).map(|i| lambda_max * i as f64 / (n - 1) as f64).collect();
    let overlap: Vec<f64> = lambda.iter().map(|&l| bbp_overlap(alpha, l)).collect();
    to_string(&json!({ "alpha": alpha, "threshold": 1.0 / alpha.sqrt(), "lambda": lambda, "overlap": overlap }))
}

/// Bound on `n` evenly spaced step counts in `[0, t_max]`.
#[allow(clippy::too_many_arguments)]
pub fn bound_curve_json(
    tau: f64,
    mu: f64,
    phi: f64,
    delta: f64,
    g: f64,
    d: usize,
    t_max: u64,
    n: usize,
) -> Result<String, String> {
    if n < 2 {
        return Err("need n >= 2".into());
    }
    let ts: Vec<u64> = (0..n).map(|i| t_max * i as u64 / (n - 1) as u64).collect();
    let c = theory_bound(tau, mu, phi, delta, g, d, &ts).map_err(|e| e.to_string())?;
    to_string(&c)
}

#[wasm_bindgen]
pub fn radius(mu0: f64, m1: f64, m2: f64, m3: f64, lambda: f64) -> Result<String, JsValue> {
    radius_json(mu0, m1, m2, m3, lambda).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = activationRadius)]
pub fn activation_radius(name: &str, rho: f64, lambda: f64) -> Result<String, JsValue> {
    activation_radius_json(name, rho, lambda).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = bbpCurve)]
pub fn bbp_curve(alpha: f64, lambda_max: f64, n: usize) -> Result<String, JsValue> {
    bbp_curve_json(alpha, lambda_max, n).map_err(|e| JsValue::from_str(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve(
    tau: f64,
    mu: f64,
    phi: f64,
    delta: f64,
    g: f64,
    d: usize,
    t_max: u64,
    n: usize,
) -> Result<String, JsValue> {
    bound_curve_json(tau, mu, phi, delta, g, d, t_max, n).map_err(|e| JsValue::from_str(&e))
}
