//! PCA spectral initialization and the closed-form spike-detection
//! thresholds.

use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, random_unit, UnitVector};
use crate::rng::Rng;
use crate::spiked::Batch;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopEigen {
    pub direction: UnitVector,
    /// Rayleigh quotient of the final iterate.
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Matrix-free power iteration on `Σ̂ = XᵀX / n`, one step at a time.
pub struct PowerIteration<'a> {
    batch: &'a Batch,
    current: UnitVector,
}

impl<'a> PowerIteration<'a> {
    pub fn new(batch: &'a Batch, start: UnitVector) -> Result<Self> {
        if start.dim() != batch.d() {
            return Err(Error::DimensionMismatch { expected: batch.d(), got: start.dim() });
        }
        Ok(PowerIteration { batch, current: start })
    }

    pub fn current(&self) -> &UnitVector {
        &self.current
    }

    /// Replaces the current iterate (used to re-orient between steps).
    pub fn set_current(&mut self, w: UnitVector) {
        self.current = w;
    }

    pub fn rayleigh(&self) -> f64 {
        dot(self.current.as_slice(), &self.batch.cov_apply(self.current.as_slice()))
    }

    /// Advances one step; returns the displacement `‖w_new − w_old‖`.
    pub fn step(&mut self) -> Result<f64> {
        let next = UnitVector::normalize(self.batch.cov_apply(self.current.as_slice()))?;
        let disp = norm(
            &next
                .as_slice()
                .iter()
                .zip(self.current.as_slice())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        self.current = next;
        Ok(disp)
    }
}

/// Leading eigenvector of the empirical covariance, from a random start.
pub fn empirical_top_eigenvector(batch: &Batch, tol: f64, max_iter: usize, rng: &mut Rng) -> Result<TopEigen> {
    if batch.n() < 2 {
        return Err(Error::Domain(format!("power iteration needs n >= 2, got {}", batch.n())));
    }
    let mut it = PowerIteration::new(batch, random_unit(batch.d(), rng)?)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        if it.step()? < tol {
            converged = true;
            break;
        }
    }
    let eigenvalue = it.rayleigh();
    Ok(TopEigen {
        direction: it.current,
        eigenvalue,
        iterations,
        converged,
    })
}

/// Mean of `½ (f(⟨w, x⟩) − y)²` over the batch.
pub fn empirical_loss(w: &[f64], batch: &Batch, labels: &[f64], spec: &ActivationSpec) -> f64 {
    let total: f64 = batch
        .rows()
        .zip(labels)
        .map(|(x, y)| 0.5 * (spec.eval(dot(w, x)) - y).powi(2))
        .sum();
    total / batch.n() as f64
}

/// Picks whichever of `±candidate` has the smaller loss on the weak labels;
/// ties go to `+candidate`.
pub fn orient_by_weak_loss(
    candidate: &UnitVector,
    batch: &Batch,
    weak_labels: &[f64],
    spec: &ActivationSpec,
) -> Result<UnitVector> {
    if weak_labels.len() != batch.n() {
        return Err(Error::DimensionMismatch { expected: batch.n(), got: weak_labels.len() });
    }
    if candidate.dim() != batch.d() {
        return Err(Error::DimensionMismatch { expected: batch.d(), got: candidate.dim() });
    }
    let flipped = candidate.negated();
    let plus = empirical_loss(candidate.as_slice(), batch, weak_labels, spec);
    let minus = empirical_loss(flipped.as_slice(), batch, weak_labels, spec);
    Ok(if minus < plus { flipped } else { candidate.clone() })
}

/// Limiting overlap `|⟨v̂, v⟩|` of the top sample eigenvector with the spike
/// when `n/d → α`: zero at or below `αλ² = 1`.
pub fn bbp_overlap(alpha: f64, lambda: f64) -> f64 {
    let s = alpha * lambda * lambda;
    if !(s > 1.0) {
        return 0.0;
    }
    if s.is_infinite() {
        return 1.0;
    }
    ((s - 1.0) / (s + 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredicateInputs {
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub eps0: f64,
    pub mu: f64,
    pub phi: f64,
    pub delta: f64,
    pub g: f64,
    pub eps_d: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredicateReport {
    pub detectable: bool,
    pub lambda_min: f64,
    pub aligned: bool,
    /// `+∞` when `αλ² ≤ 1`.
    pub rho_min: f64,
    pub informative: bool,
    pub phi_max: f64,
    pub stable: bool,
    pub delta_max: f64,
}

impl PredicateReport {
    pub fn all_hold(&self) -> bool {
        self.detectable && self.aligned && self.informative && self.stable
    }
}

/// The four pre-training/supervision/step-size conditions, each as a
/// threshold plus a strict comparison against it.
pub fn assumption_predicates(p: &PredicateInputs) -> Result<PredicateReport> {
    if !(p.tau > 0.0 && p.tau < 1.0) {
        return Err(Error::Domain(format!("tau = {} not in (0, 1)", p.tau)));
    }
    if !(p.alpha > 0.0) || !(p.lambda > 0.0) {
        return Err(Error::Domain("alpha and lambda must be positive".into()));
    }
    let t2 = p.tau * p.tau;
    let lambda_min = ((1.0 + t2) / (p.alpha * (1.0 - t2))).sqrt();
    let s = p.alpha * p.lambda * p.lambda;
    let rho_min = if s > 1.0 {
        (p.tau + p.eps0) * ((s + 1.0) / (s - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };
    let phi_max = p.mu * ((1.0 - p.tau) / 2.0).sqrt();
    let delta_max = p.mu * (1.0 - p.tau - p.eps_d) / (7.0 * p.g);
    Ok(PredicateReport {
        detectable: p.lambda > lambda_min,
        lambda_min,
        aligned: rho_min.is_finite() && p.rho > rho_min,
        rho_min,
        informative: p.phi < phi_max,
        phi_max,
        stable: p.delta < delta_max,
        delta_max,
    })
}
