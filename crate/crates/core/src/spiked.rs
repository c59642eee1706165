//! Spiked Gaussian inputs `x ~ N(0, I + λ v vᵀ)`, teacher labels, and the
//! direction geometry (v, v*, v_weak).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::geometry::{dot, embed_with_overlap, gaussian_vec, random_unit, UnitVector};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedConfig {
    pub d: usize,
    pub lambda: f64,
    /// Latent spike direction.
    pub v: UnitVector,
    /// Ground truth.
    pub v_star: UnitVector,
    /// Weak supervisor.
    pub v_weak: UnitVector,
    /// |⟨v, v*⟩|
    pub rho: f64,
    /// ⟨v_weak, v*⟩
    pub gamma: f64,
}

impl SpikedConfig {
    /// Assembles a config from explicit directions; the overlaps are
    /// recomputed from the vectors.
    pub fn from_directions(lambda: f64, v: UnitVector, v_star: UnitVector, v_weak: UnitVector) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda = {lambda} must be >= 0")));
        }
        let d = v_star.dim();
        for u in [&v, &v_weak] {
            if u.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: u.dim() });
            }
        }
        let rho = v.dot(v_star.as_slice()).abs();
        let gamma = v_weak.dot(v_star.as_slice());
        Ok(SpikedConfig { d, lambda, v, v_star, v_weak, rho, gamma })
    }

    /// Variance of the ground-truth projection ⟨v*, x⟩.
    pub fn sigma_z_sq(&self) -> f64 {
        sigma_z_sq(self.lambda, self.rho)
    }

    /// Weak supervisor's own distance to the ground truth, √(2 − 2γ).
    pub fn weak_baseline(&self) -> f64 {
        weak_baseline(self.gamma)
    }

    /// `Σ u = u + λ ⟨v, u⟩ v`
    pub fn cov_apply(&self, u: &[f64]) -> Vec<f64> {
        let s = self.lambda * self.v.dot(u);
        u.iter().zip(self.v.as_slice()).map(|(a, b)| a + s * b).collect()
    }

    /// `aᵀ Σ b`
    pub fn cov_form(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) + self.lambda * self.v.dot(a) * self.v.dot(b)
    }

    /// One fresh sample, written into `out`.
    pub fn draw_into(&self, rng: &mut Rng, out: &mut Vec<f64>) {
        *out = gaussian_vec(self.d, rng);
        let scale = ((1.0 + self.lambda).sqrt() - 1.0) * self.v.dot(out);
        for (x, vi) in out.iter_mut().zip(self.v.as_slice()) {
            *x += scale * vi;
        }
    }

    /// Iterator over an endless stream of fresh samples.
    pub fn stream<'a>(&'a self, rng: &'a mut Rng) -> SampleStream<'a> {
        SampleStream { config: self, rng }
    }
}

pub fn weak_baseline(gamma: f64) -> f64 {
    (2.0 - 2.0 * gamma).max(0.0).sqrt()
}

/// σ_z² = 1 + λρ²
pub fn sigma_z_sq(lambda: f64, rho: f64) -> f64 {
    1.0 + lambda * rho * rho
}

/// Draws v* uniformly, then embeds v and v_weak at the requested overlaps.
pub fn build_config(d: usize, lambda: f64, rho: f64, gamma: f64, rng: &mut Rng) -> Result<SpikedConfig> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} not in [0, 1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} not in (0, 1]")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda = {lambda} must be >= 0")));
    }
    let v_star = random_unit(d, rng)?;
    let v = embed_with_overlap(&v_star, rho, rng)?;
    let v_weak = embed_with_overlap(&v_star, gamma, rng)?;
    SpikedConfig::from_directions(lambda, v, v_star, v_weak)
}

/// Row-major `n × d` block of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Batch {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("batch needs at least one row".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite batch entry".into()));
            }
            data.extend(r);
        }
        Ok(Batch { data, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// `X w`
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, w)).collect()
    }

    /// `Xᵀ (X w) / n`, the empirical covariance applied to `w`.
    pub fn cov_apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for r in self.rows() {
            let s = dot(r, w);
            for (o, x) in out.iter_mut().zip(r) {
                *o += s * x;
            }
        }
        let inv = 1.0 / self.n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    /// Debug dump: header `x_0..x_{d-1},y`, one row per sample.
    pub fn write_csv<W: Write>(&self, labels: &[f64], mut out: W) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        let header: Vec<String> = (0..self.d).map(|j| format!("x_{j}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for (r, y) in self.rows().zip(labels) {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{y}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `n` rows of `g + (√(1+λ) − 1)⟨v, g⟩ v` with `g` standard normal.
pub fn sample(config: &SpikedConfig, n: usize, rng: &mut Rng) -> Result<Batch> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let mut data = Vec::with_capacity(n * config.d);
    let mut x = Vec::with_capacity(config.d);
    for _ in 0..n {
        config.draw_into(rng, &mut x);
        data.extend_from_slice(&x);
    }
    Ok(Batch { data, n, d: config.d })
}

pub struct SampleStream<'a> {
    config: &'a SpikedConfig,
    rng: &'a mut Rng,
}

impl Iterator for SampleStream<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut x = Vec::with_capacity(self.config.d);
        self.config.draw_into(self.rng, &mut x);
        Some(x)
    }
}

/// `y_i = f(⟨teacher, x_i⟩)`
pub fn label(batch: &Batch, teacher: &UnitVector, spec: &ActivationSpec) -> Result<Vec<f64>> {
    if teacher.dim() != batch.d() {
        return Err(Error::DimensionMismatch { expected: batch.d(), got: teacher.dim() });
    }
    Ok(batch.rows().map(|r| spec.eval(teacher.dot(r))).collect())
}
