//! Correlation statistics and per-value aggregation of sweep rows.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::Rng;

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < min {
        return Err(Error::Domain(format!("need at least {min} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Coefficient of determination of the least-squares line `y ≈ a + b x`.
pub fn r_squared(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedFit("x is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if syy == 0.0 {
        // a constant y is fitted exactly
        return Ok(1.0);
    }
    let slope = sxy / sxx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    Ok((1.0 - ss_res / syy).clamp(0.0, 1.0))
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
}

fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&mid_ranks(x), &mid_ranks(y))
        .ok_or_else(|| Error::UndefinedFit("all values tied; ranks are constant".into()))
}

/// Rank correlation with a two-sided p-value from the t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    check_pair(x, y, 4)?;
    let rho = spearman_rho(x, y)?;
    let n = x.len() as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::Numerical(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(Spearman { rho, p_value })
}

/// Rank correlation with a permutation p-value: the share of `shuffles`
/// random relabelings of `y` whose `|ρ|` reaches the observed one
/// (counting the observed labeling itself).
pub fn spearman_permutation(x: &[f64], y: &[f64], shuffles: usize, rng: &mut Rng) -> Result<Spearman> {
    check_pair(x, y, 4)?;
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let rho = pearson(&rx, &ry).ok_or_else(|| Error::UndefinedFit("all values tied".into()))?;
    let mut perm = ry.clone();
    let mut hits = 1usize;
    for _ in 0..shuffles {
        perm.shuffle(rng);
        if pearson(&rx, &perm).is_some_and(|r| r.abs() >= rho.abs() - 1e-12) {
            hits += 1;
        }
    }
    Ok(Spearman { rho, p_value: hits as f64 / (shuffles + 1) as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep_value: f64,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); zero when `n = 1`.
    pub std: f64,
    pub n: usize,
    /// True when `n = 1`, i.e. `std` carries no information.
    pub single: bool,
}

/// Mean and sample standard deviation of `value` per distinct `key`, sorted
/// by key. The result does not depend on row order.
pub fn aggregate(rows: &[(f64, f64)]) -> Result<Vec<Aggregate>> {
    if rows.is_empty() {
        return Err(Error::Domain("no rows to aggregate".into()));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| a.0 == b.0) {
        let vals: Vec<f64> = group.iter().map(|r| r.1).collect();
        let n = vals.len();
        let m = mean(&vals);
        let std = if n > 1 {
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push(Aggregate { sweep_value: group[0].0, mean: m, std, n, single: n == 1 });
    }
    Ok(out)
}
