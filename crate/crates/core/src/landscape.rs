//! Population-gradient probes (weak bias φ, tangential pull), the
//! effective-region radius, the gradient-norm constant and the convergence
//! bound.
//!
//! Population expectations come in two flavours: Monte Carlo over fresh
//! samples (chunked, so results do not depend on the worker count) and
//! Gauss–Hermite quadrature over the low-dimensional Gaussian projection
//! that the integrand actually depends on.

use serde::{Deserialize, Serialize};

use crate::activations::{gaussian_moments, ActivationSpec};
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, UnitVector};
use crate::quadrature::GaussHermite;
use crate::rng::{fork_seed, substream, Rng};
use crate::spiked::SpikedConfig;

pub const DEFAULT_N_MC: usize = 50_000;
pub const MIN_N_MC: usize = 100;
/// Samples per deterministic Monte Carlo chunk.
pub const MC_CHUNK: usize = 2_048;
/// Per-axis quadrature order for two- and three-dimensional projections.
pub const EXACT_ORDER_2D: usize = 64;
pub const EXACT_ORDER_3D: usize = 32;

const PHI_SUB_BATCHES: usize = 10;

fn check_dims(config: &SpikedConfig, dirs: &[&[f64]]) -> Result<()> {
    for d in dirs {
        if d.len() != config.d {
            return Err(Error::DimensionMismatch { expected: config.d, got: d.len() });
        }
    }
    Ok(())
}

fn check_n_mc(n_mc: usize) -> Result<()> {
    if n_mc < MIN_N_MC {
        return Err(Error::Domain(format!("n_mc = {n_mc}, need at least {MIN_N_MC}")));
    }
    Ok(())
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} is not finite")))
    }
}

/// Runs `body` over `n` fresh samples split into fixed chunks, each with its
/// own sub-stream of `base_seed`; returns per-chunk results in chunk order.
/// `body` receives the chunk's samples and the global index of its first one.
fn chunked<T, F>(config: &SpikedConfig, n: usize, base_seed: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn Iterator<Item = Vec<f64>>, usize) -> T + Sync,
{
    let n_chunks = n.div_ceil(MC_CHUNK);
    let run = |c: usize| {
        let mut rng = substream(base_seed, c as u64);
        let len = MC_CHUNK.min(n - c * MC_CHUNK);
        let mut it = config.stream(&mut rng).take(len);
        body(&mut it, c * MC_CHUNK)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(run).collect()
    }
}

/// Monte Carlo estimate of `E[(f(⟨w,x⟩) − f(⟨teacher,x⟩)) f′(⟨w,x⟩) x]`.
///
/// One seed is drawn from `rng`; two calls with identically seeded
/// generators see the same samples (common random numbers).
pub fn population_gradient(
    w: &[f64],
    teacher: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    check_n_mc(n_mc)?;
    check_dims(config, &[w, teacher.as_slice()])?;
    let seed = fork_seed(rng);
    let d = config.d;
    let parts = chunked(config, n_mc, seed, |xs, _| {
        let mut acc = vec![0.0; d];
        for x in xs {
            let a = dot(w, &x);
            let r = (spec.eval(a) - spec.eval(teacher.dot(&x))) * spec.d1(a);
            axpy(r, &x, &mut acc);
        }
        acc
    });
    let mut g = vec![0.0; d];
    for p in &parts {
        axpy(1.0, p, &mut g);
    }
    g.iter_mut().for_each(|c| *c /= n_mc as f64);
    check_finite(&g, "population gradient")?;
    Ok(g)
}

/// Monte Carlo estimate of `E[½ (f(⟨w,x⟩) − f(⟨teacher,x⟩))²]`; `w` need not
/// be a unit vector. Uses the same sample stream as [`population_gradient`].
pub fn population_loss(
    w: &[f64],
    teacher: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<f64> {
    check_n_mc(n_mc)?;
    check_dims(config, &[w, teacher.as_slice()])?;
    let seed = fork_seed(rng);
    let parts = chunked(config, n_mc, seed, |xs, _| {
        xs.map(|x| 0.5 * (spec.eval(dot(w, &x)) - spec.eval(teacher.dot(&x))).powi(2))
            .sum::<f64>()
    });
    Ok(parts.iter().sum::<f64>() / n_mc as f64)
}

/// The Gaussian vector `u = A x` for `x ~ N(0, Σ)` and a few directions
/// (rows of `A`), factored as `u = L g` with `g` standard normal.
///
/// Rows whose variance is already explained by earlier rows are kept as
/// linear combinations, so parallel directions are handled exactly.
pub struct GaussianProjection {
    /// `Σ aᵢ` for each direction.
    sigma_dirs: Vec<Vec<f64>>,
    /// `k × r` factor (row-major, only the first `r` columns used).
    l: Vec<Vec<f64>>,
    /// Row index that introduced each column.
    pivots: Vec<usize>,
}

impl GaussianProjection {
    pub fn new(config: &SpikedConfig, dirs: &[&[f64]]) -> Result<Self> {
        check_dims(config, dirs)?;
        let k = dirs.len();
        let sigma_dirs: Vec<Vec<f64>> = dirs.iter().map(|a| config.cov_apply(a)).collect();
        let s = |i: usize, j: usize| dot(dirs[i], &sigma_dirs[j]);
        let mut l = vec![Vec::new(); k];
        let mut pivots: Vec<usize> = Vec::new();
        for j in 0..k {
            let mut row = Vec::with_capacity(k);
            for (c, &p) in pivots.iter().enumerate() {
                let partial: f64 = (0..c).map(|c2| row[c2] * l[p][c2]).sum();
                row.push((s(j, p) - partial) / l[p][c]);
            }
            let sjj = s(j, j);
            let resid = sjj - row.iter().map(|x| x * x).sum::<f64>();
            if resid > 1e-12 * sjj.max(1.0) {
                row.push(resid.sqrt());
                pivots.push(j);
            }
            l[j] = row;
        }
        if pivots.is_empty() {
            return Err(Error::Numerical("projection has zero variance".into()));
        }
        Ok(GaussianProjection { sigma_dirs, l, pivots })
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn u_of(&self, g: &[f64], u: &mut [f64]) {
        for (ui, row) in u.iter_mut().zip(&self.l) {
            *ui = row.iter().zip(g).map(|(a, b)| a * b).sum();
        }
    }

    /// Calls `visit(weight, g, u)` over the tensor-product rule.
    fn for_each_node<F: FnMut(f64, &[f64], &[f64])>(&self, quad: &GaussHermite, mut visit: F) {
        let r = self.rank();
        let n = quad.order();
        let nodes: Vec<f64> = quad.nodes().iter().map(|x| std::f64::consts::SQRT_2 * x).collect();
        let weights: Vec<f64> = quad
            .weights()
            .iter()
            .map(|w| w / std::f64::consts::PI.sqrt())
            .collect();
        let mut idx = vec![0usize; r];
        let mut g = vec![0.0; r];
        let mut u = vec![0.0; self.l.len()];
        loop {
            let mut wt = 1.0;
            for (gi, &i) in g.iter_mut().zip(&idx) {
                *gi = nodes[i];
                wt *= weights[i];
            }
            self.u_of(&g, &mut u);
            visit(wt, &g, &u);
            let mut p = 0;
            loop {
                if p == r {
                    return;
                }
                idx[p] += 1;
                if idx[p] < n {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
        }
    }

    /// `E[h(u)]`.
    pub fn expect<F: Fn(&[f64]) -> f64>(&self, quad: &GaussHermite, h: F) -> Result<f64> {
        let mut acc = 0.0;
        self.for_each_node(quad, |w, _, u| acc += w * h(u));
        if !acc.is_finite() {
            return Err(Error::Numerical("quadrature expectation is not finite".into()));
        }
        Ok(acc)
    }

    /// `E[h(u) x]`, using `E[x | g] = Σ Aᵀ L⁻ᵀ g` on the pivot rows.
    pub fn expect_times_x<F: Fn(&[f64]) -> f64>(&self, quad: &GaussHermite, h: F) -> Result<Vec<f64>> {
        let r = self.rank();
        let mut m = vec![0.0; r];
        self.for_each_node(quad, |w, g, u| {
            let hv = w * h(u);
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi += hv * gi;
            }
        });
        // solve L_pᵀ y = m with L_p the lower-triangular pivot block
        let mut y = vec![0.0; r];
        for c in (0..r).rev() {
            let mut s = m[c];
            for c2 in c + 1..r {
                s -= self.l[self.pivots[c2]][c] * y[c2];
            }
            y[c] = s / self.l[self.pivots[c]][c];
        }
        let mut out = vec![0.0; self.sigma_dirs[0].len()];
        for (c, &p) in self.pivots.iter().enumerate() {
            axpy(y[c], &self.sigma_dirs[p], &mut out);
        }
        check_finite(&out, "quadrature gradient")?;
        Ok(out)
    }
}

/// Population gradient by quadrature over `(⟨w,x⟩, ⟨teacher,x⟩)`.
pub fn population_gradient_exact(
    w: &[f64],
    teacher: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    quad: &GaussHermite,
) -> Result<Vec<f64>> {
    let proj = GaussianProjection::new(config, &[w, teacher.as_slice()])?;
    proj.expect_times_x(quad, |u| (spec.eval(u[0]) - spec.eval(u[1])) * spec.d1(u[0]))
}

/// Population loss by quadrature; `w` need not be a unit vector.
pub fn population_loss_exact(
    w: &[f64],
    teacher: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    quad: &GaussHermite,
) -> Result<f64> {
    let proj = GaussianProjection::new(config, &[w, teacher.as_slice()])?;
    proj.expect(quad, |u| 0.5 * (spec.eval(u[0]) - spec.eval(u[1])).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub phi: f64,
    pub se: f64,
}

/// `‖∇L_weak(w) − ∇L_true(w)‖`, estimated with both labelers evaluated on the
/// same samples. The standard error comes from ten sub-batch means projected
/// onto the direction of the full mean.
pub fn weak_bias_phi(
    w: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<PhiEstimate> {
    check_n_mc(n_mc)?;
    check_dims(config, &[w.as_slice()])?;
    let seed = fork_seed(rng);
    let d = config.d;
    // sub-batches are contiguous ranges of the global sample index
    let per = (n_mc / PHI_SUB_BATCHES).max(1);
    let parts = chunked(config, n_mc, seed, |xs, start| {
        let mut sub = vec![vec![0.0; d]; PHI_SUB_BATCHES];
        let mut counts = [0usize; PHI_SUB_BATCHES];
        for (i, x) in xs.enumerate() {
            let b = ((start + i) / per).min(PHI_SUB_BATCHES - 1);
            let r = (spec.eval(config.v_star.dot(&x)) - spec.eval(config.v_weak.dot(&x))) * spec.d1(w.dot(&x));
            axpy(r, &x, &mut sub[b]);
            counts[b] += 1;
        }
        (sub, counts)
    });
    let mut sub = vec![vec![0.0; d]; PHI_SUB_BATCHES];
    let mut counts = [0usize; PHI_SUB_BATCHES];
    for (ps, pc) in &parts {
        for b in 0..PHI_SUB_BATCHES {
            axpy(1.0, &ps[b], &mut sub[b]);
            counts[b] += pc[b];
        }
    }
    let mut total = vec![0.0; d];
    for s in &sub {
        axpy(1.0, s, &mut total);
    }
    total.iter_mut().for_each(|c| *c /= n_mc as f64);
    check_finite(&total, "weak bias")?;
    let phi = norm(&total);
    let se = if phi == 0.0 {
        0.0
    } else {
        let proj: Vec<f64> = sub
            .iter()
            .zip(&counts)
            .map(|(s, &c)| dot(s, &total) / (c as f64 * phi))
            .collect();
        let m = proj.iter().sum::<f64>() / proj.len() as f64;
        let var = proj.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (proj.len() - 1) as f64;
        (var / proj.len() as f64).sqrt()
    };
    Ok(PhiEstimate { phi, se })
}

/// Weak bias by quadrature over `(⟨w,x⟩, ⟨v*,x⟩, ⟨v_weak,x⟩)`; `se` is zero.
pub fn weak_bias_phi_exact(
    w: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    quad: &GaussHermite,
) -> Result<PhiEstimate> {
    let proj = GaussianProjection::new(
        config,
        &[w.as_slice(), config.v_star.as_slice(), config.v_weak.as_slice()],
    )?;
    let g = proj.expect_times_x(quad, |u| (spec.eval(u[1]) - spec.eval(u[2])) * spec.d1(u[0]))?;
    Ok(PhiEstimate { phi: norm(&g), se: 0.0 })
}

/// `⟨−grad_true, t⟩` with `t` the unit tangent at `w` pointing toward `v*`.
pub fn tangential_pull(w: &UnitVector, v_star: &UnitVector, grad_true: &[f64]) -> Result<f64> {
    if w.dim() != v_star.dim() || grad_true.len() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: grad_true.len().min(v_star.dim()) });
    }
    let tau = w.dot(v_star.as_slice());
    let mut t = v_star.as_slice().to_vec();
    axpy(-tau, w.as_slice(), &mut t);
    let n = norm(&t);
    if n <= 1e-12 {
        return Err(Error::DegenerateTangent);
    }
    Ok(-dot(grad_true, &t) / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub mu0: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub lambda: f64,
    pub c1_hess: f64,
    pub c2_hess: f64,
    pub zeta_star: f64,
    pub drift_budget: f64,
    pub zeta: f64,
    pub tau: f64,
    pub angle_deg: f64,
    pub l_rad: f64,
}

/// Radius of the region around `v*` where the weak-supervised landscape is
/// (perturbed) strongly convex, from `μ₀` and the derivative bounds.
pub fn radius_report(mu0: f64, m1: f64, m2: f64, m3: f64, lambda: f64) -> Result<RadiusReport> {
    if !(mu0 > 0.0) || !(m1 > 0.0) || !(m2 >= 0.0) || !(m3 >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "radius needs mu0 > 0, m1 > 0, m2, m3, lambda >= 0 (got {mu0}, {m1}, {m2}, {m3}, {lambda})"
        )));
    }
    let mu = mu0 / 2.0;
    let c1 = 3.0 * 3f64.sqrt() * m1 * m2 * (1.0 + lambda).powf(1.5);
    let c2 = 1.5 * m1 * m3 * (1.0 + lambda).powi(2);
    if c1 == 0.0 && c2 == 0.0 {
        return Err(Error::DegenerateLandscape);
    }
    let zeta_star = if c2 < 1e-12 {
        mu0 / (2.0 * c1)
    } else {
        // C₂ζ² + C₁ζ − μ₀/2 = 0, written to avoid cancellation when C₂μ₀ ≪ C₁²
        let disc = (c1 * c1 + 2.0 * c2 * mu0).sqrt();
        mu0 / (c1 + disc)
    };
    let l_rad = m1 * m1 * (1.0 + lambda);
    let drift_budget = mu / (2.0 * l_rad + mu);
    let zeta = zeta_star.min(drift_budget);
    let tau = 1.0 - zeta * zeta / 2.0;
    Ok(RadiusReport {
        mu0,
        mu,
        m1,
        m2,
        m3,
        lambda,
        c1_hess: c1,
        c2_hess: c2,
        zeta_star,
        drift_budget,
        zeta,
        tau,
        angle_deg: tau.clamp(-1.0, 1.0).acos().to_degrees(),
        l_rad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientNormConstant {
    pub g_asym: f64,
    pub g_finite: f64,
}

pub fn gradient_norm_constant(m1: f64, lambda: f64, d: usize) -> Result<GradientNormConstant> {
    if d == 0 {
        return Err(Error::InvalidDimension("d must be positive".into()));
    }
    let m4 = m1.powi(4);
    let g_asym = 4.0 * m4 * (1.0 + lambda);
    let corr = m4 * (4.0 * lambda * (1.0 + lambda) + 8.0 * (1.0 + lambda).powi(2)) / d as f64;
    Ok(GradientNormConstant { g_asym, g_finite: g_asym + corr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub t_values: Vec<u64>,
    pub values: Vec<f64>,
    /// Initial boundary `2 − 2τ`.
    pub d0: f64,
    /// Stationary level `7δG/μ + 2φ²/μ²`.
    pub d_inf: f64,
    /// Per-step contraction `1 − δμ/d`.
    pub contraction: f64,
}

/// Expected squared distance bound after `T` steps, without the
/// `O(d^{-1/2})` remainder (its constant is not pinned down).
pub fn theory_bound(tau: f64, mu: f64, phi: f64, delta: f64, g: f64, d: usize, t_values: &[u64]) -> Result<BoundCurve> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau = {tau} not in (0, 1)")));
    }
    if !(mu > 0.0) || !(phi >= 0.0) || !(delta > 0.0) || !(g > 0.0) || d == 0 {
        return Err(Error::Domain("bound needs mu, delta, G > 0, phi >= 0, d >= 1".into()));
    }
    let rate = delta * mu / d as f64;
    if rate >= 1.0 {
        return Err(Error::Domain(format!("delta*mu/d = {rate} >= 1: contraction factor invalid")));
    }
    let contraction = 1.0 - rate;
    let d0 = 2.0 - 2.0 * tau;
    let d_inf = 7.0 * delta * g / mu + 2.0 * phi * phi / (mu * mu);
    let values = t_values
        .iter()
        .map(|&t| {
            // (1 − r)^T via exp/ln_1p keeps precision for tiny r
            let c = if t == 0 { 1.0 } else { (t as f64 * (-rate).ln_1p()).exp() };
            c * d0 + (1.0 - c) * d_inf
        })
        .collect();
    Ok(BoundCurve { t_values: t_values.to_vec(), values, d0, d_inf, contraction })
}

/// How population expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeProbe {
    pub step: usize,
    pub tau_now: f64,
    pub angle_deg: f64,
    pub phi: f64,
    pub se_phi: f64,
    pub pull: f64,
    pub mu0: f64,
    pub mu: f64,
    /// Monte Carlo samples, or quadrature nodes for the quadrature estimator.
    pub n_mc: usize,
    pub estimator: Estimator,
}

/// φ, tangential pull and `μ` at `w`. `μ` is `μ₀/2` at `σ_z² = 1 + λρ²`,
/// independent of `w`.
pub fn probe(
    step: usize,
    w: &UnitVector,
    config: &SpikedConfig,
    spec: &ActivationSpec,
    estimator: Estimator,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<LandscapeProbe> {
    let tau_now = w.dot(config.v_star.as_slice());
    let (phi, grad, n) = match estimator {
        Estimator::MonteCarlo => {
            let phi = weak_bias_phi(w, config, spec, n_mc, rng)?;
            let grad = population_gradient(w.as_slice(), &config.v_star, config, spec, n_mc, rng)?;
            (phi, grad, n_mc)
        }
        Estimator::Quadrature => {
            let q3 = GaussHermite::new(EXACT_ORDER_3D)?;
            let q2 = GaussHermite::new(EXACT_ORDER_2D)?;
            let phi = weak_bias_phi_exact(w, config, spec, &q3)?;
            let grad = population_gradient_exact(w.as_slice(), &config.v_star, config, spec, &q2)?;
            (phi, grad, EXACT_ORDER_3D.pow(3))
        }
    };
    let pull = tangential_pull(w, &config.v_star, &grad)?;
    let moments = gaussian_moments(spec, config.sigma_z_sq())?;
    Ok(LandscapeProbe {
        step,
        tau_now,
        angle_deg: tau_now.clamp(-1.0, 1.0).acos().to_degrees(),
        phi: phi.phi,
        se_phi: phi.se,
        pull,
        mu0: moments.mu0,
        mu: moments.mu,
        n_mc: n,
        estimator,
    })
}
