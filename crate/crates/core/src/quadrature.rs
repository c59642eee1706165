//! Gauss–Hermite rules and Gaussian expectations built on them.

use crate::error::{Error, Result};

/// Default node count for one-dimensional Gaussian moments.
pub const DEFAULT_ORDER: usize = 200;

/// Nodes and weights for `∫ e^{-x²} g(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes are the eigenvalues of the Jacobi matrix of the Hermite
    /// recurrence (zero diagonal, off-diagonal `sqrt(k/2)`), isolated one at a
    /// time by Sturm-sequence bisection and then polished with Newton on the
    /// orthonormal recurrence, which also yields the weights.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("quadrature order must be positive".into()));
        }
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let nf = n as f64;
        let off2: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
        // number of Jacobi eigenvalues strictly below `x`
        let count_below = |x: f64| -> usize {
            let mut q = -x;
            let mut c = usize::from(q < 0.0);
            for b2 in &off2 {
                let prev = if q == 0.0 { f64::EPSILON } else { q };
                q = -x - b2 / prev;
                c += usize::from(q < 0.0);
            }
            c
        };
        let bound = (2.0 * nf).sqrt() + 1.0;
        let recurrence = |z: f64| -> (f64, f64) {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            (p1, (2.0 * nf).sqrt() * p2)
        };
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // i-th largest eigenvalue: exactly n - 1 - i eigenvalues lie below it
            let target = n - 1 - i;
            let (mut lo, mut hi) = (0.0, bound);
            if i > 0 {
                hi = x[i - 1];
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let (p1, pp) = recurrence(z);
            let step = p1 / pp;
            if step.is_finite() && step.abs() < 1e-8 {
                z -= step;
            }
            let (_, pp) = recurrence(z);
            if !z.is_finite() || !pp.is_finite() || pp == 0.0 {
                return Err(Error::Numerical(format!(
                    "Gauss-Hermite root {i} of order {n} did not converge"
                )));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        Ok(GaussHermite { nodes: x, weights: w })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ e^{-x²} g(x) dx`
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// `E[g(z)]` for `z ~ N(0, variance)`.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, variance: f64, g: F) -> Result<f64> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::Domain(format!("variance {variance} must be positive")));
        }
        let scale = (2.0 * variance).sqrt();
        let v = self.integrate(|t| g(scale * t)) / std::f64::consts::PI.sqrt();
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "Gaussian expectation is not finite (variance {variance}, order {})",
                self.order()
            )));
        }
        Ok(v)
    }

    /// `E[g(a, b)]` for independent standard normals `a`, `b` (tensor rule).
    pub fn expect_std_normal_2d<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let s = std::f64::consts::SQRT_2;
        let mut acc = 0.0;
        for (&xa, &wa) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (&xb, &wb) in self.nodes.iter().zip(&self.weights) {
                inner += wb * g(s * xa, s * xb);
            }
            acc += wa * inner;
        }
        acc / std::f64::consts::PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn double_factorial(k: i32) -> f64 {
        (1..=k).rev().step_by(2).map(f64::from).product()
    }

    #[test]
    fn low_order_rule_matches_table() {
        let q = GaussHermite::new(3).unwrap();
        let r = (1.5f64).sqrt();
        assert!((q.nodes()[0] - r).abs() < 1e-14);
        assert!(q.nodes()[1].abs() < 1e-14);
        assert!((q.weights()[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn order_200_integrates_gaussian_moments() {
        let q = GaussHermite::new(DEFAULT_ORDER).unwrap();
        let total: f64 = q.weights().iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-12);
        // E[z^{2k}] = (2k-1)!! sigma^{2k}
        for k in 1..=8 {
            let m = q.expect_normal(2.0, |z| z.powi(2 * k)).unwrap();
            let exact = double_factorial(2 * k - 1) * 2f64.powi(k);
            assert!(((m - exact) / exact).abs() < 1e-11, "k={k} m={m} exact={exact}");
        }
        let odd = q.expect_normal(3.0, |z| z.powi(5)).unwrap();
        assert!(odd.abs() < 1e-10);
    }

    #[test]
    fn smooth_integrand_against_closed_form() {
        // E[cos z] = exp(-sigma^2 / 2)
        let q = GaussHermite::new(DEFAULT_ORDER).unwrap();
        for s2 in [0.5, 1.0, 7.3375] {
            let v = q.expect_normal(s2, f64::cos).unwrap();
            assert!((v - (-s2 / 2.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_rule() {
        let q = GaussHermite::new(20).unwrap();
        let v = q.expect_std_normal_2d(|a, b| a * a * b * b + a * b);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GaussHermite::new(0).is_err());
        let q = GaussHermite::new(5).unwrap();
        assert!(q.expect_normal(0.0, |z| z).is_err());
        assert!(matches!(
            q.expect_normal(1.0, |_| f64::NAN),
            Err(Error::Numerical(_))
        ));
    }
}
