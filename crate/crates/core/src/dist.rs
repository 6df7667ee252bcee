//! Colour and edge statistics shared across the crate.

use crate::error::{Error, Result};
use serde::Serialize;

const SUM_TOL: f64 = 1e-12;

/// Probability distribution over the q colours (`mu`, `nu`, `nu^sigma`, ...).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColourDistribution(Vec<f64>);

impl ColourDistribution {
    /// Validates non-negativity and normalisation (sum 1 within 1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty colour vector".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or NaN colour probability".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "colour probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    /// Point mass on colour `c`.
    pub fn indicator(q: usize, c: usize) -> Self {
        let mut v = vec![0.0; q];
        v[c] = 1.0;
        Self(v)
    }

    /// Symmetric-ansatz distribution: mass `x` on `dominant`, the rest split
    /// evenly over the other q-1 colours.
    pub fn symmetric(q: usize, dominant: usize, x: f64) -> Self {
        let rest = (1.0 - x) / (q - 1) as f64;
        let mut v = vec![rest; q];
        v[dominant] = x;
        Self(v)
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, c: usize) -> f64 {
        self.0[c]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Total variation distance to `other`.
    pub fn tv(&self, other: &Self) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Symmetric edge statistics `rho(s,t)` over ordered colour pairs, summing
/// to 1. Row sums recover the associated colour distribution (each edge is
/// counted in both orientations, so `sum_t rho(s,t) = nu(s)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDistribution {
    q: usize,
    rho: Vec<f64>,
}

impl EdgeDistribution {
    pub fn new(q: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != q * q {
            return Err(Error::DimensionMismatch(format!(
                "edge matrix has {} entries, expected {}",
                rho.len(),
                q * q
            )));
        }
        if rho.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or NaN edge probability".into(),
            ));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "edge probabilities sum to {sum}, not 1"
            )));
        }
        for s in 0..q {
            for t in (s + 1)..q {
                if (rho[s * q + t] - rho[t * q + s]).abs() > SUM_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "edge matrix not symmetric at ({s},{t})"
                    )));
                }
            }
        }
        Ok(Self { q, rho })
    }

    /// Paramagnetic edge statistics `e^{beta 1{s=t}} / (q (q-1+e^beta))`.
    pub fn para(q: usize, beta: f64) -> Self {
        let eb = beta.exp();
        let denom = q as f64 * (q as f64 - 1.0 + eb);
        let mut rho = vec![1.0 / denom; q * q];
        for s in 0..q {
            rho[s * q + s] = eb / denom;
        }
        Self { q, rho }
    }

    /// Product statistics `nu(s) nu(t)`.
    pub fn product_of(nu: &ColourDistribution) -> Self {
        let q = nu.q();
        let mut rho = vec![0.0; q * q];
        for s in 0..q {
            for t in 0..q {
                rho[s * q + t] = nu.get(s) * nu.get(t);
            }
        }
        Self { q, rho }
    }

    /// Point mass on the ordered pair `(c,c)`.
    pub fn concentrated(q: usize, c: usize) -> Self {
        let mut rho = vec![0.0; q * q];
        rho[c * q + c] = 1.0;
        Self { q, rho }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.rho[s * self.q + t]
    }

    pub fn entries(&self) -> &[f64] {
        &self.rho
    }

    /// The colour distribution induced by row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.q)
            .map(|s| self.rho[s * self.q..(s + 1) * self.q].iter().sum())
            .collect()
    }

    /// Max row-sum defect against `nu`.
    pub fn row_sum_defect(&self, nu: &ColourDistribution) -> f64 {
        self.row_sums()
            .iter()
            .zip(nu.probs())
            .map(|(r, n)| (r - n).abs())
            .fold(0.0, f64::max)
    }

    pub fn tv(&self, other: &Self) -> f64 {
        0.5 * self
            .rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}
