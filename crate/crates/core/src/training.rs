//! Spherical projected gradient descent under weak or ground-truth labels.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, UnitVector};
use crate::landscape::{population_gradient, population_gradient_exact, DEFAULT_N_MC, EXACT_ORDER_2D};
use crate::quadrature::GaussHermite;
use crate::rng::Rng;
use crate::spiked::SpikedConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervisor {
    Weak,
    GroundTruth,
}

/// Where the per-step gradient comes from.
///
/// `Online` is one fresh sample per step. `MonteCarlo` and `Exact` replace
/// it by the population gradient (estimated over `n_mc` fresh samples, or by
/// quadrature), i.e. the mean-field limit of the same recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    Online,
    MonteCarlo,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Step size in units of `1/d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub record_stride: usize,
    pub supervisor: Supervisor,
    pub gradient: GradientSource,
    /// Samples per step for `GradientSource::MonteCarlo`.
    pub n_mc: usize,
}

impl TrainerConfig {
    pub fn with_eta(steps: usize, eta: f64) -> Self {
        TrainerConfig {
            steps,
            eta: Some(eta),
            delta: None,
            record_stride: 1,
            supervisor: Supervisor::Weak,
            gradient: GradientSource::Online,
            n_mc: DEFAULT_N_MC,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        match (self.eta, self.delta) {
            (Some(e), None) if e > 0.0 && e.is_finite() => Ok(()),
            (None, Some(dl)) if dl > 0.0 && dl.is_finite() => Ok(()),
            (Some(_), Some(_)) | (None, None) => Err(Error::Config("give exactly one of eta and delta".into())),
            _ => Err(Error::Config("step size must be positive and finite".into())),
        }
    }

    /// `η`, resolving `δ/d` when the step is given as `δ`.
    pub fn eta(&self, d: usize) -> Result<f64> {
        self.validate()?;
        Ok(self.eta.unwrap_or_else(|| self.delta.unwrap() / d as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: usize,
    pub distance: f64,
    pub correlation: f64,
    pub weak_distance: f64,
}

impl Record {
    fn at(step: usize, w: &[f64], config: &SpikedConfig) -> Self {
        let dist = |t: &UnitVector| {
            w.iter().zip(t.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        Record {
            step,
            distance: dist(&config.v_star),
            correlation: config.v_star.dot(w),
            weak_distance: dist(&config.v_weak),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub final_w: UnitVector,
    pub seed: u64,
    /// Step at which the gradient went non-finite; the run stops there and
    /// `final_w` is the last finite iterate.
    pub diverged_at: Option<usize>,
    /// Free-form run parameters, written as the CSV comment line.
    pub params: String,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory has at least the step-0 record")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} seed={}", self.params, self.seed)?;
        writeln!(out, "step,distance,correlation,weak_distance")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.step, r.distance, r.correlation, r.weak_distance)?;
        }
        Ok(())
    }
}

/// `(f(⟨w,x⟩) − y) f′(⟨w,x⟩) x`
pub fn stochastic_gradient(w: &[f64], x: &[f64], y: f64, spec: &ActivationSpec) -> Result<Vec<f64>> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: x.len() });
    }
    if !y.is_finite() || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite sample".into()));
    }
    let a = dot(w, x);
    let r = (spec.eval(a) - y) * spec.d1(a);
    if !r.is_finite() {
        return Err(Error::Numerical(format!("non-finite residual at <w,x> = {a}")));
    }
    Ok(x.iter().map(|c| r * c).collect())
}

/// `(w − ηg) / ‖w − ηg‖`
pub fn pgd_step(w: &UnitVector, g: &[f64], eta: f64) -> Result<UnitVector> {
    if g.len() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: g.len() });
    }
    let mut next = w.as_slice().to_vec();
    axpy(-eta, g, &mut next);
    let n = norm(&next);
    if n == 0.0 {
        return Err(Error::DegenerateStep);
    }
    if !n.is_finite() {
        return Err(Error::Numerical("non-finite step".into()));
    }
    next.iter_mut().for_each(|c| *c /= n);
    UnitVector::normalize(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResidual {
    pub riemannian: Vec<f64>,
    pub residual: Vec<f64>,
    pub bound_ok: bool,
}

/// Splits a projected step into the Riemannian-gradient step plus a
/// residual, and checks `‖residual‖ ≤ 3η²‖g‖²`. The check allows the
/// rounding error of a normalized `d`-vector (`4ε√d`), which dominates once
/// `η‖g‖` drops below about 1e-8.
pub fn projection_residual(w: &UnitVector, g: &[f64], eta: f64) -> Result<ProjectionResidual> {
    let next = pgd_step(w, g, eta)?;
    let wg = w.dot(g);
    let mut riemannian = g.to_vec();
    axpy(-wg, w.as_slice(), &mut riemannian);
    let mut residual = next.into_inner();
    axpy(-1.0, w.as_slice(), &mut residual);
    axpy(eta, &riemannian, &mut residual);
    let gn = norm(g);
    let roundoff = 4.0 * f64::EPSILON * (w.dim() as f64).sqrt();
    let bound_ok = norm(&residual) <= 3.0 * eta * eta * gn * gn + roundoff;
    Ok(ProjectionResidual { riemannian, residual, bound_ok })
}

/// Runs `trainer.steps` projected steps from `w0`.
///
/// Records are taken at step 0, every `record_stride` steps and at the last
/// step. A non-finite gradient ends the run early with `diverged_at` set.
pub fn train_online(
    w0: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    trainer: &TrainerConfig,
    seed: u64,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if w0.dim() != config.d {
        return Err(Error::DimensionMismatch { expected: config.d, got: w0.dim() });
    }
    let eta = trainer.eta(config.d)?;
    let teacher = match trainer.supervisor {
        Supervisor::Weak => &config.v_weak,
        Supervisor::GroundTruth => &config.v_star,
    };
    let quad = match trainer.gradient {
        GradientSource::Exact => Some(GaussHermite::new(EXACT_ORDER_2D)?),
        _ => None,
    };
    let params = format!(
        "d={} lambda={} rho={} gamma={} eta={} steps={} supervisor={:?} gradient={:?}",
        config.d, config.lambda, config.rho, config.gamma, eta, trainer.steps, trainer.supervisor, trainer.gradient
    )
    .to_lowercase();

    let mut w = w0.clone();
    let mut records = vec![Record::at(0, w.as_slice(), config)];
    let mut diverged_at = None;
    let mut x = Vec::with_capacity(config.d);
    for t in 0..trainer.steps {
        let grad = match trainer.gradient {
            GradientSource::Online => {
                config.draw_into(rng, &mut x);
                let y = spec.eval(teacher.dot(&x));
                stochastic_gradient(w.as_slice(), &x, y, spec)
            }
            GradientSource::MonteCarlo => population_gradient(w.as_slice(), teacher, config, spec, trainer.n_mc, rng),
            GradientSource::Exact => {
                population_gradient_exact(w.as_slice(), teacher, config, spec, quad.as_ref().unwrap())
            }
        };
        let next = match grad.and_then(|g| pgd_step(&w, &g, eta)) {
            Ok(n) => n,
            Err(Error::Numerical(_)) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        w = next;
        let step = t + 1;
        if step % trainer.record_stride == 0 || step == trainer.steps {
            records.push(Record::at(step, w.as_slice(), config));
        }
    }
    if let Some(t) = diverged_at {
        if records.last().map(|r| r.step) != Some(t) {
            records.push(Record::at(t, w.as_slice(), config));
        }
    }
    Ok(Trajectory { records, final_w: w, seed, diverged_at, params })
}
