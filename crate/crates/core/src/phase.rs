//! Paramagnetic/ferromagnetic phase sets and membership tests.
//!
//! A configuration `sigma` belongs to the phase around a target colour
//! distribution `nu` at tolerance `eps` when
//! `sum_c | |sigma^{-1}(c)| - n nu(c) | < eps n` (strict inequality). The
//! ferromagnetic set can be closed under the q placements of the dominant
//! colour, which is what the Swendsen-Wang experiments monitor.

use crate::dist::{ColourDistribution, EdgeDistribution};
use crate::error::{Error, Result};
use crate::meanfield::{self, PottsParams};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Para,
    Ferro,
}

/// Declarative description of a phase set.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseSpec {
    pub kind: PhaseKind,
    pub eps: f64,
    /// Dominant colour for the ferromagnetic phase.
    pub dominant: usize,
    /// Close the ferromagnetic set under dominant-colour permutation.
    pub include_permutations: bool,
}

impl PhaseSpec {
    pub fn para(eps: f64) -> Self {
        Self {
            kind: PhaseKind::Para,
            eps,
            dominant: 0,
            include_permutations: false,
        }
    }

    pub fn ferro(eps: f64, dominant: usize, include_permutations: bool) -> Self {
        Self {
            kind: PhaseKind::Ferro,
            eps,
            dominant,
            include_permutations,
        }
    }

    /// Resolves the target colour distribution at the given parameters.
    pub fn resolve(&self, p: &PottsParams) -> Result<PhaseTarget> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "phase eps must lie in (0,1), got {}",
                self.eps
            )));
        }
        if self.dominant >= p.q {
            return Err(Error::InvalidParameter(format!(
                "dominant colour {} out of range for q={}",
                self.dominant, p.q
            )));
        }
        let (nu, _) = phase_statistics(self.kind, self.dominant, p);
        Ok(PhaseTarget {
            nu,
            eps: self.eps,
            dominant: self.dominant,
            permutations: self.kind == PhaseKind::Ferro && self.include_permutations,
        })
    }
}

/// Target colour/edge statistics of a phase: the expected marginals of the
/// matching BP fixed point. For a ferromagnetic request below the
/// uniqueness threshold (where no ferromagnetic fixed point exists, e.g.
/// control experiments) the target degenerates to the monochromatic point
/// mass on the dominant colour.
pub fn phase_statistics(
    kind: PhaseKind,
    dominant: usize,
    p: &PottsParams,
) -> (ColourDistribution, EdgeDistribution) {
    match kind {
        PhaseKind::Para => (
            ColourDistribution::uniform(p.q),
            EdgeDistribution::para(p.q, p.beta),
        ),
        PhaseKind::Ferro => match meanfield::ferro_magnetisation(p) {
            Some(x) => {
                let mu = ColourDistribution::symmetric(p.q, dominant, x);
                meanfield::marginal_map(&mu, p)
            }
            None => (
                ColourDistribution::indicator(p.q, dominant),
                EdgeDistribution::concentrated(p.q, dominant),
            ),
        },
    }
}

/// Concrete phase set: target distribution, tolerance, permutation
/// closure.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseTarget {
    pub nu: ColourDistribution,
    pub eps: f64,
    pub dominant: usize,
    pub permutations: bool,
}

impl PhaseTarget {
    pub fn fixed(nu: ColourDistribution, eps: f64) -> Self {
        Self {
            nu,
            eps,
            dominant: 0,
            permutations: false,
        }
    }

    /// Target count vectors `n * target(c, k)` for every allowed dominant
    /// placement `k`; one vector when the set is not permutation-closed.
    pub fn target_counts(&self, n: usize) -> Vec<Vec<f64>> {
        self.placements()
            .map(|k| {
                (0..self.nu.q())
                    .map(|c| n as f64 * self.target(c, k))
                    .collect()
            })
            .collect()
    }

    /// Target value for colour `c` when the dominant colour is placed at
    /// `k` (only meaningful placements differ for ferro-shaped targets).
    fn target(&self, c: usize, k: usize) -> f64 {
        if c == k {
            self.nu.get(self.dominant)
        } else if c == self.dominant {
            self.nu.get(k)
        } else {
            self.nu.get(c)
        }
    }

    fn placements(&self) -> std::ops::Range<usize> {
        if self.permutations {
            0..self.nu.q()
        } else {
            self.dominant..self.dominant + 1
        }
    }

    /// `sum_c |counts(c) - n target_k(c)|` for placement `k`.
    pub fn deviation_for(&self, counts: &[u64], n: usize, k: usize) -> f64 {
        counts
            .iter()
            .enumerate()
            .map(|(c, &cnt)| (cnt as f64 - n as f64 * self.target(c, k)).abs())
            .sum()
    }

    /// Best placement and its deviation.
    pub fn best_placement(&self, counts: &[u64], n: usize) -> (usize, f64) {
        self.placements()
            .map(|k| (k, self.deviation_for(counts, n, k)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one placement")
    }

    /// Strict membership test.
    pub fn contains(&self, counts: &[u64], n: usize) -> bool {
        self.best_placement(counts, n).1 < self.eps * n as f64
    }

    /// Membership plus the matched dominant placement.
    pub fn matched_permutation(&self, counts: &[u64], n: usize) -> (bool, Option<usize>) {
        let (k, dev) = self.best_placement(counts, n);
        if dev < self.eps * n as f64 {
            (true, Some(k))
        } else {
            (false, None)
        }
    }
}

/// Evaluates membership of colour counts in the phase set.
pub fn phase_membership(counts: &[u64], target: &PhaseTarget, n: usize) -> (bool, Option<usize>) {
    target.matched_permutation(counts, n)
}
