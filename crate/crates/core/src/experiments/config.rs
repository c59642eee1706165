use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activations::{make_activation, ActivationSpec};
use crate::error::{Error, Result};
use crate::landscape::{Estimator, DEFAULT_N_MC};
use crate::spectral::DEFAULT_TOL;
use crate::spiked::sigma_z_sq;
use crate::training::GradientSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Exp1,
    Exp2,
    SweepLambda,
    SweepRho,
    SweepGamma,
    SweepLr,
    LandscapeDynamics,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Exp1 => "exp1",
            Kind::Exp2 => "exp2",
            Kind::SweepLambda => "sweep_lambda",
            Kind::SweepRho => "sweep_rho",
            Kind::SweepGamma => "sweep_gamma",
            Kind::SweepLr => "sweep_lr",
            Kind::LandscapeDynamics => "landscape_dynamics",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        self as u64 + 1
    }

    /// The parameter a sweep kind varies.
    pub fn swept(self) -> Option<Param> {
        match self {
            Kind::Exp1 | Kind::SweepRho => Some(Param::Rho),
            Kind::SweepLambda => Some(Param::Lambda),
            Kind::SweepGamma => Some(Param::Gamma),
            Kind::SweepLr => Some(Param::Eta),
            Kind::Exp2 | Kind::LandscapeDynamics => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Lambda,
    Rho,
    Gamma,
    Eta,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::Rho => "rho",
            Param::Gamma => "gamma",
            Param::Eta => "eta",
        }
    }
}

/// A scalar or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Values::One(v) => std::slice::from_ref(v),
            Values::Many(v) => v,
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, Values::Many(_))
    }

    fn scalar(&self, key: &str) -> Result<f64> {
        match self {
            Values::One(v) => Ok(*v),
            Values::Many(v) if v.len() == 1 => Ok(v[0]),
            Values::Many(_) => Err(Error::Config(format!("`{key}` must be a single value for this kind"))),
        }
    }
}

impl From<f64> for Values {
    fn from(v: f64) -> Self {
        Values::One(v)
    }
}

impl From<Vec<f64>> for Values {
    fn from(v: Vec<f64>) -> Self {
        Values::Many(v)
    }
}

/// An activation name, optionally with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationRef {
    Name(String),
    WithParams {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl ActivationRef {
    pub fn name(&self) -> &str {
        match self {
            ActivationRef::Name(n) | ActivationRef::WithParams { name: n, .. } => n,
        }
    }

    /// Builds the activation, filling in `sigma_z_sq = 1 + λρ²` when the
    /// activation accepts it and the config does not pin it.
    pub fn build(&self, lambda: f64, rho: f64) -> Result<ActivationSpec> {
        let mut params = match self {
            ActivationRef::Name(_) => BTreeMap::new(),
            ActivationRef::WithParams { params, .. } => params.clone(),
        };
        if !params.contains_key("c") {
            params.entry("sigma_z_sq".into()).or_insert_with(|| sigma_z_sq(lambda, rho));
        }
        make_activation(self.name(), &params)
    }
}

fn default_record_stride() -> usize {
    1
}
fn default_gradient() -> GradientSource {
    GradientSource::Exact
}
fn default_pca_tol() -> f64 {
    DEFAULT_TOL
}
fn default_pca_max_iter() -> usize {
    1000
}
fn default_dynamics_max_steps() -> usize {
    20
}
fn default_dynamics_tol() -> f64 {
    1e-8
}
fn default_n_pop() -> usize {
    DEFAULT_N_MC
}

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub d: usize,
    pub lambda: Values,
    pub rho: Values,
    pub gamma: Values,
    pub eta: Values,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub tau_list: Vec<f64>,
    pub n_pre: usize,
    #[serde(default = "default_n_pop")]
    pub n_pop: usize,
    pub seeds: Vec<u64>,
    pub activation: ActivationRef,
    #[serde(default)]
    pub output_path: String,
    /// Per-step gradient used by the trainer.
    #[serde(default = "default_gradient")]
    pub gradient: GradientSource,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default = "default_pca_tol")]
    pub pca_tol: f64,
    #[serde(default = "default_pca_max_iter")]
    pub pca_max_iter: usize,
    #[serde(default = "default_dynamics_max_steps")]
    pub dynamics_max_steps: usize,
    #[serde(default = "default_dynamics_tol")]
    pub dynamics_tol: f64,
    /// Estimator for landscape probes; defaults to quadrature when
    /// `gradient = "exact"` and Monte Carlo otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_estimator: Option<Estimator>,
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

fn grid(lo: f64, step: f64, n: usize) -> Vec<f64> {
    // rounded so that 0.05 * 3 prints as 0.15
    (0..n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    /// The paper-scale defaults for each kind.
    pub fn default_for(kind: Kind) -> Self {
        let mut cfg = ExperimentConfig {
            kind,
            d: 200,
            lambda: 15.0.into(),
            rho: 1.0.into(),
            gamma: 0.5.into(),
            eta: 4e-5.into(),
            t: 30,
            tau_list: Vec::new(),
            n_pre: 10_000,
            n_pop: DEFAULT_N_MC,
            seeds: (1..=5).collect(),
            activation: ActivationRef::Name("hermite3".into()),
            output_path: format!("results/{}", kind.as_str()),
            gradient: GradientSource::Exact,
            record_stride: 1,
            pca_tol: DEFAULT_TOL,
            pca_max_iter: default_pca_max_iter(),
            dynamics_max_steps: default_dynamics_max_steps(),
            dynamics_tol: default_dynamics_tol(),
            probe_estimator: None,
        };
        match kind {
            Kind::Exp1 | Kind::SweepRho => cfg.rho = grid(0.0, 0.05, 21).into(),
            Kind::Exp2 => {
                cfg.rho = 0.65.into();
                cfg.eta = 1e-5.into();
                cfg.t = 2000;
                cfg.tau_list = vec![0.1, 0.4, 0.7, 0.9];
                cfg.record_stride = 10;
            }
            Kind::SweepLambda => {
                cfg.lambda = vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0].into();
            }
            Kind::SweepGamma => cfg.gamma = grid(0.05, 0.05, 19).into(),
            Kind::SweepLr => {
                cfg.eta = log_space(1e-6, 1e-1, 11).into();
                cfg.gradient = GradientSource::MonteCarlo;
            }
            Kind::LandscapeDynamics => {
                cfg.lambda = vec![5.0, 15.0, 30.0].into();
                cfg.rho = 0.65.into();
                cfg.gamma = 0.65.into();
                cfg.activation = ActivationRef::Name("tanh_cubed".into());
            }
        }
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides one key from a `key=value` string, with the value parsed as
    /// TOML (so `rho=[0.1,0.2]` and `activation="tanh_cubed"` both work).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        let mut table: toml::Table = toml::from_str(&self.to_toml_string()?)
            .map_err(|e| Error::Config(e.to_string()))?;
        let parsed: toml::Table = toml::from_str(&format!("v = {}", value.trim()))
            .or_else(|_| toml::from_str(&format!("v = {:?}", value.trim())))
            .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        table.insert(key.trim().to_string(), parsed["v"].clone());
        let next: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn values(&self, p: Param) -> &Values {
        match p {
            Param::Lambda => &self.lambda,
            Param::Rho => &self.rho,
            Param::Gamma => &self.gamma,
            Param::Eta => &self.eta,
        }
    }

    pub fn swept_values(&self) -> Option<&[f64]> {
        self.kind.swept().map(|p| self.values(p).as_slice())
    }

    pub fn scalar(&self, p: Param) -> Result<f64> {
        self.values(p).scalar(p.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 2 {
            return bad(format!("d = {} must be at least 2", self.d));
        }
        if self.t == 0 || self.n_pre < 2 || self.record_stride == 0 || self.pca_max_iter == 0 {
            return bad("T, record_stride and pca_max_iter must be positive; n_pre at least 2".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.n_pop < crate::landscape::MIN_N_MC {
            return bad(format!("n_pop must be at least {}", crate::landscape::MIN_N_MC));
        }
        let params = [Param::Lambda, Param::Rho, Param::Gamma, Param::Eta];
        let swept = self.kind.swept();
        for p in params {
            let vals = self.values(p).as_slice();
            if vals.is_empty() {
                return bad(format!("`{}` has no values", p.as_str()));
            }
            let is_swept = swept == Some(p) || (self.kind == Kind::LandscapeDynamics && p == Param::Lambda);
            if !is_swept && vals.len() > 1 {
                return bad(format!("`{}` is a list but {} does not sweep it", p.as_str(), self.kind.as_str()));
            }
            for &v in vals {
                let ok = match p {
                    Param::Lambda => v >= 0.0 && v.is_finite(),
                    Param::Rho => (0.0..=1.0).contains(&v),
                    Param::Gamma => v > 0.0 && v <= 1.0,
                    Param::Eta => v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return bad(format!("`{}` value {v} out of range", p.as_str()));
                }
            }
        }
        if self.kind == Kind::Exp2 {
            if self.tau_list.is_empty() {
                return bad("exp2 needs a non-empty tau_list".into());
            }
            if self.tau_list.iter().any(|t| !(-1.0..=1.0).contains(t)) {
                return bad("tau_list values must lie in [-1, 1]".into());
            }
        }
        let rho = self.rho.as_slice()[0];
        let lambda = self.lambda.as_slice()[0];
        self.activation
            .build(lambda, rho)
            .map(|_| ())
            .map_err(|e| Error::Config(format!("activation: {e}")))
    }

    pub fn estimator(&self) -> Estimator {
        self.probe_estimator.unwrap_or(match self.gradient {
            GradientSource::Exact => Estimator::Quadrature,
            _ => Estimator::MonteCarlo,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for kind in [
            Kind::Exp1,
            Kind::Exp2,
            Kind::SweepLambda,
            Kind::SweepRho,
            Kind::SweepGamma,
            Kind::SweepLr,
            Kind::LandscapeDynamics,
        ] {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
        let e = ExperimentConfig::default_for(Kind::Exp1);
        assert_eq!(e.rho.as_slice().len(), 21);
        assert_eq!(e.rho.as_slice()[3], 0.15);
        let lr = ExperimentConfig::default_for(Kind::SweepLr);
        assert!((lr.eta.as_slice()[10] - 0.1).abs() < 1e-15);
        assert!((lr.eta.as_slice()[0] - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn parses_flat_file() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
kind = "sweep_gamma"
d = 50
lambda = 4
rho = 0.8
gamma = [0.2, 0.5]
eta = 4e-5
T = 10
n_pre = 500
seeds = [1, 2]
activation = { name = "projected_tanh", params = { c = 0.5 } }
"#,
        )
        .unwrap();
        assert_eq!(cfg.swept_values().unwrap(), &[0.2, 0.5]);
        assert_eq!(cfg.gradient, GradientSource::Exact);
        assert_eq!(cfg.scalar(Param::Lambda).unwrap(), 4.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig::default_for(Kind::Exp1);
        cfg.gamma = vec![0.2, 0.5].into();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(Kind::Exp2);
        cfg.tau_list.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(Kind::Exp1);
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(Kind::Exp1);
        cfg.activation = ActivationRef::Name("relu".into());
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"exp9\"").is_err());
    }

    #[test]
    fn set_overrides() {
        let mut cfg = ExperimentConfig::default_for(Kind::SweepLambda);
        cfg.set("rho=0.6").unwrap();
        assert_eq!(cfg.rho, Values::One(0.6));
        cfg.set("seeds=[3]").unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        cfg.set("activation=tanh_cubed").unwrap();
        assert_eq!(cfg.activation.name(), "tanh_cubed");
        assert!(cfg.set("rho=[0.1, 0.2]").is_err());
        assert!(cfg.set("nonsense").is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e-6, 1e-1, 11);
        assert_eq!(v.len(), 11);
        assert!((v[2] / v[1] - v[1] / v[0]).abs() < 1e-9);
    }
}
