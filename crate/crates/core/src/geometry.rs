//! Directions on the unit sphere S^{d-1} and the distance/correlation/angle
//! conversions between them.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance on `|‖x‖ - 1|` accepted when wrapping an existing vector.
pub const NORM_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn gaussian_vec(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A direction of Euclidean norm one in dimension `d >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `coords`, which must already have unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_dim(coords.len())?;
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("vector norm {n} is not 1")));
        }
        Ok(UnitVector(coords))
    }

    /// Normalizes `coords` onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        check_dim(coords.len())?;
        let n = norm(&coords);
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Numerical(format!(
                "cannot normalize a vector of norm {n}"
            )));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(UnitVector(coords))
    }

    /// The standard basis vector `e_i`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        check_dim(d)?;
        if i >= d {
            return Err(Error::Domain(format!("basis index {i} >= d = {d}")));
        }
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        Ok(UnitVector(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn negated(&self) -> Self {
        UnitVector(self.0.iter().map(|c| -c).collect())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("d = {d}, need d >= 2")));
    }
    Ok(())
}

/// Uniform draw from the sphere (Gaussian, then normalize).
pub fn random_unit(d: usize, rng: &mut Rng) -> Result<UnitVector> {
    check_dim(d)?;
    loop {
        let g = gaussian_vec(d, rng);
        if norm(&g) > 0.0 {
            return UnitVector::normalize(g);
        }
    }
}

/// Returns `overlap * target + sqrt(1 - overlap^2) * u` with `u` uniform on the
/// unit sphere of `target`'s orthogonal complement.
pub fn embed_with_overlap(target: &UnitVector, overlap: f64, rng: &mut Rng) -> Result<UnitVector> {
    if !(-1.0..=1.0).contains(&overlap) {
        return Err(Error::Domain(format!("overlap {overlap} not in [-1, 1]")));
    }
    let d = target.dim();
    let u = loop {
        let mut g = gaussian_vec(d, rng);
        let proj = target.dot(&g);
        axpy(-proj, target.as_slice(), &mut g);
        // second pass removes the rounding residue of the first
        let proj = target.dot(&g);
        axpy(-proj, target.as_slice(), &mut g);
        let n = norm(&g);
        if n > 1e-8 {
            g.iter_mut().for_each(|c| *c /= n);
            break g;
        }
    };
    let ortho = (1.0 - overlap * overlap).max(0.0).sqrt();
    let coords = target
        .as_slice()
        .iter()
        .zip(&u)
        .map(|(t, u)| overlap * t + ortho * u)
        .collect();
    UnitVector::normalize(coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub correlation: f64,
    pub distance: f64,
    pub distance_sq: f64,
    pub angle_deg: f64,
}

impl PairMetrics {
    /// Metrics implied by a correlation on the sphere.
    pub fn from_correlation(correlation: f64) -> Self {
        let c = correlation.clamp(-1.0, 1.0);
        let distance_sq = (2.0 - 2.0 * c).max(0.0);
        PairMetrics {
            correlation,
            distance: distance_sq.sqrt(),
            distance_sq,
            angle_deg: c.acos().to_degrees(),
        }
    }
}

pub fn metrics(a: &UnitVector, b: &UnitVector) -> Result<PairMetrics> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(PairMetrics::from_correlation(a.dot(b.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn random_unit_rejects_small_dimension() {
        let mut rng = seeded(0);
        assert!(matches!(random_unit(1, &mut rng), Err(Error::InvalidDimension(_))));
        let v = random_unit(2, &mut rng).unwrap();
        assert!((norm(v.as_slice()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_unit_mean_abs_correlation_matches_sqrt_2_over_pi_d() {
        let d = 200;
        let mut rng = seeded(11);
        let target = random_unit(d, &mut rng).unwrap();
        let draws = 1000;
        let mean: f64 = (0..draws)
            .map(|_| random_unit(d, &mut rng).unwrap().dot(target.as_slice()).abs())
            .sum::<f64>()
            / draws as f64;
        let expected = (2.0 / (std::f64::consts::PI * d as f64)).sqrt();
        assert!((expected - 0.0564).abs() < 1e-3);
        assert!((mean - expected).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sphere_identity_for_random_pairs() {
        let mut rng = seeded(3);
        let target = random_unit(200, &mut rng).unwrap();
        for _ in 0..100 {
            let v = random_unit(200, &mut rng).unwrap();
            let m = metrics(&v, &target).unwrap();
            let direct: f64 = v
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!((direct - (2.0 - 2.0 * m.correlation)).abs() < 1e-12);
            assert!((m.distance_sq + 2.0 * m.correlation - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_unit_componentwise_mean_is_unbiased() {
        let d = 8;
        let n = 10_000;
        let mut rng = seeded(5);
        let mut sum = vec![0.0; d];
        for _ in 0..n {
            let v = random_unit(d, &mut rng).unwrap();
            axpy(1.0, v.as_slice(), &mut sum);
        }
        // each coordinate has variance 1/d
        let se = (1.0 / d as f64 / n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn embed_degenerate_and_orthogonal_cases() {
        let mut rng = seeded(7);
        let t = random_unit(50, &mut rng).unwrap();
        let same = embed_with_overlap(&t, 1.0, &mut rng).unwrap();
        for (a, b) in same.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let orth = embed_with_overlap(&t, 0.0, &mut rng).unwrap();
        assert!(orth.dot(t.as_slice()).abs() < 1e-10);
        let anti = embed_with_overlap(&t, -1.0, &mut rng).unwrap();
        assert!((anti.dot(t.as_slice()) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn embed_rejects_out_of_range_overlap() {
        let mut rng = seeded(7);
        let t = random_unit(10, &mut rng).unwrap();
        assert!(matches!(embed_with_overlap(&t, 1.01, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn embed_recovers_requested_overlap() {
        let mut rng = seeded(9);
        let t = random_unit(200, &mut rng).unwrap();
        let v = embed_with_overlap(&t, 0.65, &mut rng).unwrap();
        assert!((metrics(&v, &t).unwrap().correlation - 0.65).abs() < 1e-10);
        for i in 0..100 {
            let d = 2 + (i % 7) * 40;
            let t = random_unit(d, &mut rng).unwrap();
            let ov = -1.0 + 2.0 * (i as f64) / 99.0;
            let v = embed_with_overlap(&t, ov, &mut rng).unwrap();
            assert!((v.dot(t.as_slice()) - ov).abs() < 1e-10, "d={d} ov={ov}");
        }
    }

    #[test]
    fn metrics_known_values() {
        let a = UnitVector::basis(3, 0).unwrap();
        let b = UnitVector::basis(3, 1).unwrap();
        let m = metrics(&a, &a).unwrap();
        assert_eq!((m.correlation, m.distance, m.distance_sq, m.angle_deg), (1.0, 0.0, 0.0, 0.0));
        let m = metrics(&a, &b).unwrap();
        assert_eq!(m.correlation, 0.0);
        assert!((m.distance - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(m.distance_sq, 2.0);
        assert!((m.angle_deg - 90.0).abs() < 1e-12);
        let m = PairMetrics::from_correlation(0.9944);
        assert!((m.angle_deg - 6.07).abs() < 0.01, "{}", m.angle_deg);
    }

    #[test]
    fn metrics_dimension_mismatch() {
        let a = UnitVector::basis(3, 0).unwrap();
        let b = UnitVector::basis(4, 0).unwrap();
        assert!(matches!(metrics(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unit_vector_rejects_non_unit() {
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::new(vec![1.0]).is_err());
        assert!(UnitVector::normalize(vec![0.0, 0.0]).is_err());
    }
}
