//! Bond percolation on (sub)graphs in the binomial-edge and exact-edge
//! models, the branching-process quantities phi/chi/psi, per-colour-class
//! criticality of the Swendsen-Wang percolation step, and the
//! ferromagnetic giant-component identity.

use crate::dist::{ColourDistribution, EdgeDistribution};
use crate::error::{Error, Result};
use crate::meanfield::{self, PottsParams};
use crate::rgraph::{ComponentStats, MultiGraph, UnionFind};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

/// Branching-process quantities for percolation at parameter `p` on a
/// d-regular graph: extinction probability `phi` of the Bin(d-1, p)
/// process, giant-component vertex fraction `chi` and edge density `psi`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BranchingQuantities {
    pub phi: f64,
    pub chi: f64,
    pub psi: f64,
    pub p: f64,
    pub d: usize,
}

/// Solves `phi = (p phi + 1 - p)^{d-1}` for the unique root in (0,1) and
/// evaluates `chi = 1 - (p phi + 1 - p)^d`, `psi = (d p / 2)(1 - phi^2)`.
/// Only defined in the supercritical regime `p > 1/(d-1)`.
pub fn branching_quantities(d: usize, p: f64) -> Result<BranchingQuantities> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("d must be >= 3, got {d}")));
    }
    if !(p > 1.0 / (d as f64 - 1.0) && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} outside the supercritical range (1/(d-1), 1) for d = {d}"
        )));
    }
    let f = |y: f64| y - (p * y + 1.0 - p).powi(d as i32 - 1);
    // f is strictly concave with roots at phi and 1; its maximiser
    // y* = ((1/((d-1)p))^{1/(d-2)} - (1-p)) / p lies strictly between
    // them, giving a well-conditioned bracket [0, y*].
    let df = d as f64;
    let y_star = ((1.0 / ((df - 1.0) * p)).powf(1.0 / (df - 2.0)) - (1.0 - p)) / p;
    let mut lo = 0.0;
    let mut hi = y_star.min(1.0);
    if !(f(hi) > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no interior extinction probability at d={d}, p={p}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    let chi = 1.0 - (p * phi + 1.0 - p).powi(d as i32);
    let psi = 0.5 * d as f64 * p * (1.0 - phi * phi);
    Ok(BranchingQuantities { phi, chi, psi, p, d })
}

/// `1/(d-1) - 2(dp/2 - psi) / (d (1 - chi))`; strictly positive throughout
/// the supercritical regime, certifying that the graph outside the giant
/// component percolates subcritically.
///
/// Evaluated through the equivalent cancellation-free form
/// `1/(d-1) - p (p phi + 1 - p)^{d-2}` (substitute `phi = u^{d-1}`,
/// `1 - chi = u^d`, `dp/2 - psi = (dp/2) phi^2` with `u = p phi + 1 - p`);
/// the raw quotient degenerates to 0/0 as p approaches 1.
pub fn subcritical_inequality(d: usize, p: f64) -> Result<f64> {
    let bq = branching_quantities(d, p)?;
    let df = d as f64;
    let u = p * bq.phi + 1.0 - p;
    Ok(1.0 / (df - 1.0) - p * u.powi(d as i32 - 2))
}

/// Edge-retention model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PercolationMode {
    /// Keep each edge independently with probability p.
    Binomial(f64),
    /// Keep a uniformly random subset of exactly m edges.
    Exact(usize),
}

/// Percolation over the whole graph.
pub fn percolate<R: Rng>(g: &MultiGraph, mode: PercolationMode, rng: &mut R) -> Result<ComponentStats> {
    percolate_induced(g, None, mode, rng)
}

/// Percolation on the subgraph induced by `keep` (all vertices when
/// `None`). Binomial draws consume one variate per parent-graph edge in
/// canonical order, so colour-class experiments on a shared graph are
/// reproducible; eligible edges are those with both endpoints kept.
pub fn percolate_induced<R: Rng>(
    g: &MultiGraph,
    keep: Option<&[bool]>,
    mode: PercolationMode,
    rng: &mut R,
) -> Result<ComponentStats> {
    if let Some(k) = keep {
        if k.len() != g.n() {
            return Err(Error::DimensionMismatch(
                "keep mask does not match vertex count".into(),
            ));
        }
    }
    let kept = |v: u32| keep.map_or(true, |k| k[v as usize]);
    let mut retained: Vec<usize> = Vec::new();
    match mode {
        PercolationMode::Binomial(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
            }
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                let draw = rng.gen_bool(p);
                if draw && kept(u) && kept(v) {
                    retained.push(e);
                }
            }
        }
        PercolationMode::Exact(m) => {
            let mut eligible: Vec<usize> = g
                .edges()
                .iter()
                .enumerate()
                .filter(|&(_, &(u, v))| kept(u) && kept(v))
                .map(|(e, _)| e)
                .collect();
            if m > eligible.len() {
                return Err(Error::InvalidParameter(format!(
                    "requested {m} edges but only {} are eligible",
                    eligible.len()
                )));
            }
            let (chosen, _) = eligible.partial_shuffle(rng, m);
            retained.extend_from_slice(chosen);
        }
    }

    // Components over the kept vertex set.
    let idx: Vec<Option<u32>> = {
        let mut next = 0u32;
        (0..g.n())
            .map(|v| {
                if kept(v as u32) {
                    let i = next;
                    next += 1;
                    Some(i)
                } else {
                    None
                }
            })
            .collect()
    };
    let n_kept = idx.iter().flatten().count();
    let mut uf = UnionFind::new(n_kept);
    for &e in &retained {
        let (u, v) = g.edges()[e];
        if u != v {
            uf.union(idx[u as usize].unwrap() as usize, idx[v as usize].unwrap() as usize);
        }
    }
    let mut size_of = vec![0usize; n_kept];
    for v in 0..n_kept {
        size_of[uf.find(v)] += 1;
    }
    let mut edges_of = vec![0usize; n_kept];
    for &e in &retained {
        let (u, _) = g.edges()[e];
        edges_of[uf.find(idx[u as usize].unwrap() as usize)] += 1;
    }
    let mut comps: Vec<(usize, usize)> = (0..n_kept)
        .filter(|&v| size_of[v] > 0)
        .map(|v| (size_of[v], edges_of[v]))
        .collect();
    comps.sort_by(|a, b| b.cmp(a));
    let sum_squares_rest = comps.iter().skip(1).map(|&(s, _)| s * s).sum();
    Ok(ComponentStats {
        sizes: comps.iter().map(|&(s, _)| s).collect(),
        edges: comps.iter().map(|&(_, e)| e).collect(),
        sum_squares_rest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Sub,
    Super,
}

/// Effective percolation parameter of colour class `s` in the SW step,
/// `r = (1 - e^{-beta}) rho(s,s) / nu(s)`, classified against the critical
/// value `1/(d-1)` (the boundary counts as subcritical).
pub fn colour_class_parameter(
    nu: &ColourDistribution,
    rho: &EdgeDistribution,
    s: usize,
    p: &PottsParams,
) -> Result<(f64, Criticality)> {
    if nu.get(s) <= 0.0 {
        return Err(Error::ZeroMass(format!("colour {s} has zero mass")));
    }
    let r = -(-p.beta).exp_m1() * rho.get(s, s) / nu.get(s);
    let class = if r > 1.0 / (p.d as f64 - 1.0) {
        Criticality::Super
    } else {
        Criticality::Sub
    };
    Ok((r, class))
}

/// Residual of the ferromagnetic giant-component identity: with
/// `x = mu_ferro(1)` and `r = (e^beta - 1) x / (1 + (e^beta - 1) x)`,
///
/// ```text
/// chi(r) = (q nu_f(1) - 1) / ((q-1) nu_f(1))    and
/// phi(r) = (1 - x) / ((q-1) x)
/// ```
///
/// hold exactly; the returned value is the sum of the two absolute
/// defects. Requires `beta > beta_u`.
pub fn giant_identity_residual(q: usize, d: usize, beta: f64) -> Result<f64> {
    let p = PottsParams::new(q, d, beta)?;
    let x = meanfield::ferro_magnetisation(&p).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "no ferromagnetic fixed point at q={q}, d={d}, beta={beta}"
        ))
    })?;
    let kappa = p.kappa();
    let r = kappa * x / (1.0 + kappa * x);
    let bq = branching_quantities(d, r)?;
    let mu = ColourDistribution::symmetric(q, 0, x);
    let (nu_f, _) = meanfield::marginal_map(&mu, &p);
    let nu1 = nu_f.get(0);
    let chi_pred = (q as f64 * nu1 - 1.0) / ((q as f64 - 1.0) * nu1);
    let phi_pred = (1.0 - x) / ((q as f64 - 1.0) * x);
    Ok((bq.chi - chi_pred).abs() + (bq.phi - phi_pred).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::thresholds;
    use crate::rgraph::{components, sample_regular, EdgeSet};
    use crate::seeding::stream;

    #[test]
    fn branching_quantities_d3_p07() {
        let bq = branching_quantities(3, 0.7).unwrap();
        assert!((bq.phi - 9.0 / 49.0).abs() < 1e-12);
        assert!((bq.chi - (1.0 - (3.0f64 / 7.0).powi(3))).abs() < 1e-12);
        assert!((bq.psi - 1.0145772594752186).abs() < 1e-10);
        // Self-consistency of the fixed point.
        assert!((bq.phi - (bq.p * bq.phi + 1.0 - bq.p).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn branching_quantities_limits() {
        // p -> 1: certain survival.
        let bq = branching_quantities(3, 1.0 - 1e-9).unwrap();
        assert!(bq.phi < 1e-8);
        assert!((bq.chi - 1.0).abs() < 1e-7);
        assert!((bq.psi - 1.5).abs() < 1e-7);
        // p -> 1/(d-1): criticality.
        let bq = branching_quantities(3, 0.5 + 1e-7).unwrap();
        assert!(bq.phi > 0.99);
        assert!(bq.chi < 0.01);
        assert!(bq.psi < 0.01);
        assert!(branching_quantities(3, 0.5).is_err());
    }

    #[test]
    fn subcritical_inequality_positive_on_grid() {
        for d in 3..=10 {
            let lo = 1.0 / (d as f64 - 1.0);
            for i in 1..=100 {
                let p = lo + i as f64 * (1.0 - lo) / 101.0;
                let v = subcritical_inequality(d, p).unwrap();
                assert!(v > 0.0, "inequality fails at d={d}, p={p}: {v}");
            }
        }
        // p -> 1: the value tends to 1/(d-1).
        let v = subcritical_inequality(3, 1.0 - 1e-9).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn subcritical_inequality_matches_raw_formula() {
        // Away from the degenerate corner the closed form agrees with the
        // literal quotient.
        for (d, p) in [(3, 0.7), (4, 0.5), (8, 0.3), (10, 0.2)] {
            let bq = branching_quantities(d, p).unwrap();
            let df = d as f64;
            let raw = 1.0 / (df - 1.0) - 2.0 * (df * p / 2.0 - bq.psi) / (df * (1.0 - bq.chi));
            let v = subcritical_inequality(d, p).unwrap();
            assert!((raw - v).abs() < 1e-12, "forms disagree at d={d}, p={p}");
        }
    }

    #[test]
    fn percolate_limits() {
        let g = sample_regular(50, 3, &mut stream(21, 0)).unwrap();
        let none = percolate(&g, PercolationMode::Binomial(0.0), &mut stream(21, 1)).unwrap();
        assert_eq!(none.sizes, vec![1; 50]);
        let all = percolate(&g, PercolationMode::Binomial(1.0), &mut stream(21, 2)).unwrap();
        // A random 3-regular graph on 50 vertices is connected with high
        // probability; this seed gives one component.
        assert_eq!(all.sizes[0], 50);
        assert_eq!(all.edges[0], 75);
    }

    #[test]
    fn exact_mode_counts_edges() {
        let g = sample_regular(40, 4, &mut stream(22, 0)).unwrap();
        let stats = percolate(&g, PercolationMode::Exact(30), &mut stream(22, 1)).unwrap();
        let total: usize = stats.edges.iter().sum();
        assert_eq!(total, 30);
        assert!(percolate(&g, PercolationMode::Exact(1000), &mut stream(22, 2)).is_err());
    }

    #[test]
    fn monotone_coupling_in_p() {
        // Shared uniforms per edge: larger p keeps a superset of edges, so
        // |C1| and sum |C_i|^2 are pathwise nondecreasing.
        let g = sample_regular(300, 3, &mut stream(23, 0)).unwrap();
        let us: Vec<f64> = {
            let mut rng = stream(23, 1);
            (0..g.num_edges()).map(|_| rng.gen()).collect()
        };
        let mut prev_c1 = 0usize;
        let mut prev_sq = 0usize;
        for i in 1..=9 {
            let p = i as f64 / 10.0;
            let mut set = EdgeSet::empty(g.num_edges());
            for (e, &u) in us.iter().enumerate() {
                if u < p {
                    set.insert(e);
                }
            }
            let stats = components(&g, &set);
            let c1 = stats.sizes[0];
            let sq: usize = stats.sizes.iter().map(|&s| s * s).sum();
            assert!(c1 >= prev_c1);
            assert!(sq >= prev_sq);
            prev_c1 = c1;
            prev_sq = sq;
        }
    }

    #[test]
    fn colour_class_parameters() {
        let p = PottsParams::new(3, 3, 2.0_f64.ln()).unwrap();
        let nu = ColourDistribution::uniform(3);
        let rho = EdgeDistribution::para(3, p.beta);
        let (r, class) = colour_class_parameter(&nu, &rho, 0, &p).unwrap();
        assert!((r - 0.25).abs() < 1e-14);
        assert_eq!(class, Criticality::Sub);

        // Exactly at beta_h the paramagnetic parameter sits on the
        // boundary 1/(d-1).
        let th = thresholds(3, 3).unwrap();
        let ph = PottsParams::new(3, 3, th.beta_h).unwrap();
        let rho_h = EdgeDistribution::para(3, ph.beta);
        let (r, _) = colour_class_parameter(&nu, &rho_h, 0, &ph).unwrap();
        assert!((r - 0.5).abs() < 1e-12);

        // Ferro phase: dominant colour supercritical, others subcritical.
        let pf = PottsParams::new(3, 3, 1.6).unwrap();
        let x = meanfield::ferro_magnetisation(&pf).unwrap();
        let mu = ColourDistribution::symmetric(3, 0, x);
        let (nu_f, rho_f) = meanfield::marginal_map(&mu, &pf);
        let (r1, c1) = colour_class_parameter(&nu_f, &rho_f, 0, &pf).unwrap();
        let want = pf.kappa() * x / (1.0 + pf.kappa() * x);
        assert!((r1 - want).abs() < 1e-12);
        assert_eq!(c1, Criticality::Super);
        let (_, c2) = colour_class_parameter(&nu_f, &rho_f, 1, &pf).unwrap();
        assert_eq!(c2, Criticality::Sub);
    }

    #[test]
    fn giant_identity_point_checks() {
        assert!(giant_identity_residual(3, 3, 1.38).unwrap() < 1e-8);
        let th = thresholds(4, 5).unwrap();
        assert!(giant_identity_residual(4, 5, th.beta_c + 0.05).unwrap() < 1e-8);
        assert!(giant_identity_residual(3, 3, 0.5).is_err());
    }
}
