//! Scalar activations with three derivatives, their derivative bounds, and the
//! Gaussian moments that set the curvature constant μ₀.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, DEFAULT_ORDER};

/// Half-width, in units of σ_z, of the interval on which unbounded
/// activations get their local derivative bounds.
pub const LOCAL_BOUND_SIGMAS: f64 = 8.0;

/// Default smoothing for the mollified ReLU: gives M₂ = 1/(4ε) = 0.1.
pub const MOLLIFIED_RELU_EPS: f64 = 2.5;
/// Default smoothing for the leaky variant: gives M₂ = 1/(8β) = 0.15.
pub const SMOOTHED_LEAKY_BETA: f64 = 1.0 / 1.2;

const LEAKY_SLOPE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    /// f(z) = z³ − 3z
    Hermite3,
    /// f(z) = 2 tanh³(z)
    TanhCubed,
    /// f(z) = tanh(z) − c z
    ProjectedTanh { c: f64 },
    /// f(z) = ε log(1 + e^{z/ε})
    MollifiedRelu { eps: f64 },
    /// f(z) = s_β(z) − ½ s_β(−z) − c z with s_β(z) = β log(1 + e^{z/β})
    SmoothedLeakyRelu { beta: f64, c: f64 },
    /// f(z) = z
    Identity,
    /// f(z) = tanh(z)
    Tanh,
    /// f(z) = z² − 1 (even; used to exercise sign ties)
    Hermite2,
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

impl ActivationKind {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::Hermite3 => z * z * z - 3.0 * z,
            Self::TanhCubed => 2.0 * z.tanh().powi(3),
            Self::ProjectedTanh { c } => z.tanh() - c * z,
            Self::MollifiedRelu { eps } => eps * softplus(z / eps),
            Self::SmoothedLeakyRelu { beta, c } => {
                beta * softplus(z / beta) - LEAKY_SLOPE * beta * softplus(-z / beta) - c * z
            }
            Self::Identity => z,
            Self::Tanh => z.tanh(),
            Self::Hermite2 => z * z - 1.0,
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match *self {
            Self::Hermite3 => 3.0 * z * z - 3.0,
            Self::TanhCubed => {
                let t = z.tanh();
                6.0 * t * t * (1.0 - t * t)
            }
            Self::ProjectedTanh { c } => {
                let t = z.tanh();
                1.0 - t * t - c
            }
            Self::MollifiedRelu { eps } => sigmoid(z / eps),
            Self::SmoothedLeakyRelu { beta, c } => {
                sigmoid(z / beta) + LEAKY_SLOPE * sigmoid(-z / beta) - c
            }
            Self::Identity => 1.0,
            Self::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Self::Hermite2 => 2.0 * z,
        }
    }

    pub fn d2(&self, z: f64) -> f64 {
        match *self {
            Self::Hermite3 => 6.0 * z,
            Self::TanhCubed => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                12.0 * t * s * (s - t * t)
            }
            Self::ProjectedTanh { .. } | Self::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Self::MollifiedRelu { eps } => {
                let s = sigmoid(z / eps);
                s * (1.0 - s) / eps
            }
            Self::SmoothedLeakyRelu { beta, .. } => {
                let s = sigmoid(z / beta);
                (1.0 - LEAKY_SLOPE) * s * (1.0 - s) / beta
            }
            Self::Identity => 0.0,
            Self::Hermite2 => 2.0,
        }
    }

    pub fn d3(&self, z: f64) -> f64 {
        match *self {
            Self::Hermite3 => 6.0,
            Self::TanhCubed => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                12.0 * s * s * s - 84.0 * t * t * s * s + 24.0 * t.powi(4) * s
            }
            Self::ProjectedTanh { .. } | Self::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                -2.0 * s * (1.0 - 3.0 * t * t)
            }
            Self::MollifiedRelu { eps } => {
                let s = sigmoid(z / eps);
                s * (1.0 - s) * (1.0 - 2.0 * s) / (eps * eps)
            }
            Self::SmoothedLeakyRelu { beta, .. } => {
                let s = sigmoid(z / beta);
                (1.0 - LEAKY_SLOPE) * s * (1.0 - s) * (1.0 - 2.0 * s) / (beta * beta)
            }
            Self::Identity | Self::Hermite2 => 0.0,
        }
    }

    /// Slope of the linear term removed from the raw activation, if any.
    fn projection_slope(&self) -> f64 {
        match *self {
            Self::ProjectedTanh { c } | Self::SmoothedLeakyRelu { c, .. } => c,
            _ => 0.0,
        }
    }

    fn is_odd(&self) -> bool {
        matches!(
            self,
            Self::Hermite3 | Self::TanhCubed | Self::ProjectedTanh { .. } | Self::Identity | Self::Tanh
        )
    }
}

/// An activation together with its global (or locally truncated) derivative
/// bounds M₁, M₂, M₃ and its declared information exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub name: String,
    pub kind: ActivationKind,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub info_exponent_claim: u32,
    /// Set when the bounds only hold on `[-8σ_z, 8σ_z]`.
    pub locally_bounded: bool,
}

impl ActivationSpec {
    pub fn eval(&self, z: f64) -> f64 {
        self.kind.eval(z)
    }

    pub fn d1(&self, z: f64) -> f64 {
        self.kind.d1(z)
    }

    pub fn d2(&self, z: f64) -> f64 {
        self.kind.d2(z)
    }

    pub fn d3(&self, z: f64) -> f64 {
        self.kind.d3(z)
    }

    pub fn is_odd(&self) -> bool {
        self.kind.is_odd()
    }

    /// Builds a spec whose bounds are measured on a dense grid over `[-half_width, half_width]`.
    pub fn with_measured_bounds(name: &str, kind: ActivationKind, half_width: f64, info_exponent: u32) -> Self {
        let (m1, m2, m3) = measured_bounds(&kind, half_width);
        ActivationSpec {
            name: name.to_string(),
            kind,
            m1,
            m2,
            m3,
            info_exponent_claim: info_exponent,
            locally_bounded: false,
        }
    }

    /// Test helper activations (`f(z) = z`, `f(z) = z² − 1`, raw `tanh`).
    pub fn identity() -> Self {
        Self::with_measured_bounds("identity", ActivationKind::Identity, 10.0, 1)
    }

    pub fn hermite2() -> Self {
        ActivationSpec {
            locally_bounded: true,
            ..Self::with_measured_bounds("hermite2", ActivationKind::Hermite2, LOCAL_BOUND_SIGMAS, 2)
        }
    }

    pub fn tanh() -> Self {
        Self::with_measured_bounds("tanh", ActivationKind::Tanh, 10.0, 1)
    }

    /// Checks derivative bounds and finite-difference consistency on a grid
    /// over `[-half_width, half_width]`. Returns the largest relative
    /// finite-difference mismatch.
    pub fn validate(&self, half_width: f64) -> Result<f64> {
        let n = 400;
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            let z = -half_width + 2.0 * half_width * i as f64 / n as f64;
            let (g1, g2, g3) = (self.d1(z), self.d2(z), self.d3(z));
            let slack = 1e-9;
            if g1.abs() > self.m1 * (1.0 + slack) + slack
                || g2.abs() > self.m2 * (1.0 + slack) + slack
                || g3.abs() > self.m3 * (1.0 + slack) + slack
            {
                return Err(Error::Domain(format!(
                    "{}: derivative bound violated at z = {z}",
                    self.name
                )));
            }
            let h = 1e-5 * z.abs().max(1.0);
            let fd = |f: &dyn Fn(f64) -> f64| (f(z + h) - f(z - h)) / (2.0 * h);
            let e1 = (fd(&|x| self.eval(x)) - g1).abs() / (1.0 + g1.abs());
            let e2 = (fd(&|x| self.d1(x)) - g2).abs() / (1.0 + g2.abs());
            let e3 = (fd(&|x| self.d2(x)) - g3).abs() / (1.0 + g3.abs());
            worst = worst.max(e1).max(e2).max(e3);
        }
        Ok(worst)
    }
}

fn measured_bounds(kind: &ActivationKind, half_width: f64) -> (f64, f64, f64) {
    let n = 200_000;
    let mut m = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..=n {
        let z = -half_width + 2.0 * half_width * i as f64 / n as f64;
        m.0 = m.0.max(kind.d1(z).abs());
        m.1 = m.1.max(kind.d2(z).abs());
        m.2 = m.2.max(kind.d3(z).abs());
    }
    m
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    params.get(key).copied()
}

fn positive_param(name: &str, params: &BTreeMap<String, f64>, key: &str, default: f64) -> Result<f64> {
    let v = param(params, key).unwrap_or(default);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name}: `{key}` must be positive, got {v}")));
    }
    Ok(v)
}

/// Builds one of the library activations.
///
/// | name | parameters |
/// |---|---|
/// | `hermite3` | `sigma_z_sq` (truncation scale for the local bounds, default 1) |
/// | `tanh_cubed` | none |
/// | `projected_tanh` | `c`, or `sigma_z_sq` to compute `c = E[sech²(z)]` |
/// | `mollified_relu` | `eps` (default 2.5) |
/// | `smoothed_leaky_relu` | `beta` (default 1/1.2), and `c` or `sigma_z_sq` |
pub fn make_activation(name: &str, params: &BTreeMap<String, f64>) -> Result<ActivationSpec> {
    match name {
        "hermite3" => {
            let s2 = positive_param(name, params, "sigma_z_sq", 1.0)?;
            let r = LOCAL_BOUND_SIGMAS * s2.sqrt();
            Ok(ActivationSpec {
                name: name.into(),
                kind: ActivationKind::Hermite3,
                m1: 3.0 * r * r - 3.0,
                m2: 6.0 * r,
                m3: 6.0,
                info_exponent_claim: 3,
                locally_bounded: true,
            })
        }
        "tanh_cubed" => Ok(ActivationSpec::with_measured_bounds(
            name,
            ActivationKind::TanhCubed,
            20.0,
            3,
        )),
        "projected_tanh" => {
            let c = match (param(params, "c"), param(params, "sigma_z_sq")) {
                (Some(c), _) => c,
                (None, Some(s2)) => centering_constant(&ActivationSpec::tanh(), s2)?,
                (None, None) => {
                    return Err(Error::MissingParameter {
                        name: name.into(),
                        param: "c or sigma_z_sq".into(),
                    })
                }
            };
            Ok(ActivationSpec::with_measured_bounds(
                name,
                ActivationKind::ProjectedTanh { c },
                20.0,
                3,
            ))
        }
        "mollified_relu" => {
            let eps = positive_param(name, params, "eps", MOLLIFIED_RELU_EPS)?;
            let kind = ActivationKind::MollifiedRelu { eps };
            // analytic suprema of σ, σ', σ''
            let (m1, m2, m3) = if param(params, "eps").is_none() {
                (1.0, 0.1, 0.02)
            } else {
                (1.0, 0.25 / eps, 1.0 / (6.0 * 3f64.sqrt() * eps * eps))
            };
            Ok(ActivationSpec {
                name: name.into(),
                kind,
                m1,
                m2,
                m3,
                info_exponent_claim: 1,
                locally_bounded: false,
            })
        }
        "smoothed_leaky_relu" => {
            let beta = positive_param(name, params, "beta", SMOOTHED_LEAKY_BETA)?;
            let raw = ActivationSpec::with_measured_bounds(
                "smoothed_leaky_relu_raw",
                ActivationKind::SmoothedLeakyRelu { beta, c: 0.0 },
                20.0,
                1,
            );
            let c = match (param(params, "c"), param(params, "sigma_z_sq")) {
                (Some(c), _) => c,
                (None, Some(s2)) => centering_constant(&raw, s2)?,
                (None, None) => {
                    return Err(Error::MissingParameter {
                        name: name.into(),
                        param: "c or sigma_z_sq".into(),
                    })
                }
            };
            Ok(ActivationSpec::with_measured_bounds(
                name,
                ActivationKind::SmoothedLeakyRelu { beta, c },
                20.0,
                3,
            ))
        }
        other => Err(Error::UnknownActivation(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub sigma_z_sq: f64,
    /// E[f′(z)²]
    pub c1: f64,
    /// E[f′(z)² z²/σ_z²]
    pub c2: f64,
    pub mu0: f64,
    pub mu: f64,
    /// E[raw′(z)] for projected activations.
    pub centering_c: Option<f64>,
}

/// c₁, c₂, μ₀ = min(c₁, c₂) and μ = μ₀/2 under z ~ N(0, σ_z²).
pub fn gaussian_moments(spec: &ActivationSpec, sigma_z_sq: f64) -> Result<GaussianMoments> {
    gaussian_moments_with_order(spec, sigma_z_sq, DEFAULT_ORDER)
}

pub fn gaussian_moments_with_order(
    spec: &ActivationSpec,
    sigma_z_sq: f64,
    order: usize,
) -> Result<GaussianMoments> {
    let q = GaussHermite::new(order)?;
    let c1 = q.expect_normal(sigma_z_sq, |z| spec.d1(z).powi(2))?;
    let c2 = q.expect_normal(sigma_z_sq, |z| spec.d1(z).powi(2) * z * z / sigma_z_sq)?;
    let mu0 = c1.min(c2);
    let centering_c = match spec.kind {
        ActivationKind::ProjectedTanh { .. } | ActivationKind::SmoothedLeakyRelu { .. } => {
            Some(centering_constant(spec, sigma_z_sq)?)
        }
        _ => None,
    };
    Ok(GaussianMoments {
        sigma_z_sq,
        c1,
        c2,
        mu0,
        mu: mu0 / 2.0,
        centering_c,
    })
}

/// The slope `c` that makes `raw(z) − c·z` have `E[f′(z)] = 0`, i.e.
/// `c = E[raw′(z)]`, where `raw` is `spec` with any existing linear
/// projection added back.
pub fn centering_constant(spec: &ActivationSpec, sigma_z_sq: f64) -> Result<f64> {
    let q = GaussHermite::new(DEFAULT_ORDER)?;
    let slope = spec.kind.projection_slope();
    q.expect_normal(sigma_z_sq, |z| spec.d1(z) + slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn library() -> Vec<ActivationSpec> {
        vec![
            make_activation("hermite3", &no_params()).unwrap(),
            make_activation("tanh_cubed", &no_params()).unwrap(),
            make_activation("projected_tanh", &params(&[("sigma_z_sq", 1.05)])).unwrap(),
            make_activation("mollified_relu", &no_params()).unwrap(),
            make_activation("smoothed_leaky_relu", &params(&[("sigma_z_sq", 1.05)])).unwrap(),
        ]
    }

    #[test]
    fn hermite3_values_at_zero() {
        let f = make_activation("hermite3", &no_params()).unwrap();
        assert_eq!((f.eval(0.0), f.d1(0.0), f.d2(0.0), f.d3(0.0)), (0.0, -3.0, 0.0, 6.0));
        assert!(f.locally_bounded);
        assert_eq!(f.m1, 189.0);
    }

    #[test]
    fn tanh_cubed_saturates() {
        let f = make_activation("tanh_cubed", &no_params()).unwrap();
        assert!((f.eval(40.0) - 2.0).abs() < 1e-15);
        assert!((f.eval(-40.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_missing() {
        assert!(matches!(
            make_activation("relu6", &no_params()),
            Err(Error::UnknownActivation(_))
        ));
        assert!(matches!(
            make_activation("projected_tanh", &no_params()),
            Err(Error::MissingParameter { .. })
        ));
        assert!(make_activation("mollified_relu", &params(&[("eps", -1.0)])).is_err());
    }

    #[test]
    fn identity_moments() {
        let m = gaussian_moments(&ActivationSpec::identity(), 3.0).unwrap();
        assert!((m.c1 - 1.0).abs() < 1e-12);
        assert!((m.c2 - 1.0).abs() < 1e-12);
        assert!((m.mu0 - 1.0).abs() < 1e-12);
        assert_eq!(m.mu, m.mu0 / 2.0);
    }

    #[test]
    fn centering_constant_limits() {
        assert!((centering_constant(&ActivationSpec::identity(), 2.0).unwrap() - 1.0).abs() < 1e-12);
        let c = centering_constant(&ActivationSpec::tanh(), 1e-8).unwrap();
        assert!((c - 1.0).abs() < 1e-6);
        // E[sech²(z)], z ~ N(0, 1.05)
        let c = centering_constant(&ActivationSpec::tanh(), 1.05).unwrap();
        assert!((c - 0.5968).abs() < 1e-4, "c = {c}");
    }

    #[test]
    fn projected_variants_are_centered() {
        for s2 in [0.5, 1.05, 7.3375] {
            let sp = params(&[("sigma_z_sq", s2)]);
            for name in ["projected_tanh", "smoothed_leaky_relu"] {
                let f = make_activation(name, &sp).unwrap();
                let q = GaussHermite::new(DEFAULT_ORDER).unwrap();
                let m = q.expect_normal(s2, |z| f.d1(z)).unwrap();
                assert!(m.abs() <= 1e-5, "{name} at {s2}: {m}");
                // re-centering an already projected spec recovers the same slope
                let c = centering_constant(&f, s2).unwrap();
                assert!((c - f.kind.projection_slope()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_and_bounds() {
        for f in library() {
            let width = if f.locally_bounded { LOCAL_BOUND_SIGMAS } else { 10.0 };
            let worst = f.validate(width).unwrap();
            assert!(worst <= 1e-5, "{}: {worst}", f.name);
        }
    }

    #[test]
    fn odd_activations_are_odd() {
        for f in library().into_iter().filter(|f| f.is_odd()) {
            for i in 0..=400 {
                let z = -8.0 + 16.0 * i as f64 / 400.0;
                assert!((f.eval(-z) + f.eval(z)).abs() <= 1e-12 * (1.0 + f.eval(z).abs()), "{}", f.name);
            }
        }
    }

    #[test]
    fn mollified_relu_declared_and_analytic_bounds() {
        let f = make_activation("mollified_relu", &no_params()).unwrap();
        assert_eq!((f.m1, f.m2, f.m3), (1.0, 0.1, 0.02));
        let measured = measured_bounds(&f.kind, 40.0);
        assert!((measured.1 - 0.1).abs() < 1e-6);
        assert!(measured.2 <= 0.02);
        let g = make_activation("mollified_relu", &params(&[("eps", 0.5)])).unwrap();
        let measured = measured_bounds(&g.kind, 40.0);
        assert!((measured.1 - g.m2).abs() < 1e-6);
        assert!((measured.2 - g.m3).abs() < 1e-6);
    }

    #[test]
    fn mollified_relu_mu0_tends_to_one_half() {
        let f = make_activation("mollified_relu", &params(&[("eps", 1e-3)])).unwrap();
        for s2 in [1.0, 1.05, 4.0] {
            let m = gaussian_moments(&f, s2).unwrap();
            assert!((m.mu0 - 0.5).abs() < 0.01, "{m:?}");
        }
    }

    #[test]
    fn projected_tanh_moments_at_1_05() {
        let f = make_activation("projected_tanh", &params(&[("sigma_z_sq", 1.05)])).unwrap();
        let m = gaussian_moments(&f, 1.05).unwrap();
        // quadrature values; see the acceptance suite for the comparison with
        // the published worked example
        assert!((m.centering_c.unwrap() - 0.5968).abs() < 1e-4);
        assert!((m.c1 - 0.0995).abs() < 1e-3, "{m:?}");
        assert!((m.c2 - 0.1809).abs() < 1e-3, "{m:?}");
        assert_eq!(m.mu0, m.c1);
    }
}
