//! Exact Boltzmann computations on tiny graphs by full state enumeration:
//! partition functions (total and phase-restricted), conditional marginals,
//! the Glauber transition kernel, bottleneck ratios, TV evolution of the
//! conditional measure, and the exact Nishimori-identity check by double
//! enumeration over pairings and configurations.
//!
//! States are indexed in mixed-radix little-endian order with vertex 0
//! fastest: the colour of vertex `v` in state `s` is `(s / q^v) % q`.

use crate::dist::ColourDistribution;
use crate::error::{Error, Result};
use crate::meanfield::PottsParams;
use crate::phase::PhaseTarget;
use crate::rgraph::{Colour, MultiGraph};
use std::collections::HashMap;

pub const DEFAULT_STATE_CAP: usize = 1 << 24;

/// Enumeration context for a small graph.
pub struct ExactContext<'g> {
    pub g: &'g MultiGraph,
    pub p: PottsParams,
    states: usize,
}

impl<'g> ExactContext<'g> {
    pub fn new(g: &'g MultiGraph, p: PottsParams, state_cap: Option<usize>) -> Result<Self> {
        let cap = state_cap.unwrap_or(DEFAULT_STATE_CAP);
        let states_f = (p.q as f64).powi(g.n() as i32);
        if states_f > cap as f64 {
            return Err(Error::StateCapExceeded {
                states: states_f,
                cap,
            });
        }
        Ok(Self {
            g,
            p,
            states: states_f as usize,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    /// Decodes state index into the buffer (little-endian, vertex 0 fastest).
    pub fn decode(&self, mut state: usize, buf: &mut [Colour]) {
        for slot in buf.iter_mut() {
            *slot = (state % self.p.q) as Colour;
            state /= self.p.q;
        }
    }

    pub fn encode(&self, sigma: &[Colour]) -> usize {
        let mut state = 0usize;
        for &c in sigma.iter().rev() {
            state = state * self.p.q + c as usize;
        }
        state
    }
}

/// Number of monochromatic edges (with multiplicity; self-loops count 1).
pub fn hamiltonian(g: &MultiGraph, sigma: &[Colour]) -> usize {
    let mut h = 0usize;
    for &(u, v) in g.edges() {
        if u == v || sigma[u as usize] == sigma[v as usize] {
            h += 1;
        }
    }
    h
}

/// Optional restriction of the state space.
pub enum Restriction<'a> {
    None,
    Phase(&'a PhaseTarget),
    Predicate(&'a dyn Fn(&[Colour]) -> bool),
}

impl Restriction<'_> {
    fn allows(&self, sigma: &[Colour], counts: &[u64], n: usize) -> bool {
        match self {
            Restriction::None => true,
            Restriction::Phase(t) => t.contains(counts, n),
            Restriction::Predicate(f) => f(sigma),
        }
    }
}

fn colour_counts(sigma: &[Colour], q: usize) -> Vec<u64> {
    let mut counts = vec![0u64; q];
    for &c in sigma {
        counts[c as usize] += 1;
    }
    counts
}

/// `log sum_{sigma in S} e^{beta H(sigma)}` by streaming log-sum-exp.
pub fn partition_function(ctx: &ExactContext, restriction: &Restriction) -> Result<f64> {
    let n = ctx.g.n();
    let mut buf = vec![0 as Colour; n];
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    for s in 0..ctx.num_states() {
        ctx.decode(s, &mut buf);
        let counts = colour_counts(&buf, ctx.p.q);
        if !restriction.allows(&buf, &counts, n) {
            continue;
        }
        let x = ctx.p.beta * hamiltonian(ctx.g, &buf) as f64;
        if x > max {
            sum = sum * (max - x).exp() + 1.0;
            max = x;
        } else {
            sum += (x - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroMass("restriction excludes every state".into()));
    }
    Ok(max + sum.ln())
}

/// Normalised Boltzmann probabilities over all states.
pub fn boltzmann(ctx: &ExactContext) -> Vec<f64> {
    let n = ctx.g.n();
    let mut buf = vec![0 as Colour; n];
    let mut logw = vec![0.0f64; ctx.num_states()];
    let mut max = f64::NEG_INFINITY;
    for s in 0..ctx.num_states() {
        ctx.decode(s, &mut buf);
        logw[s] = ctx.p.beta * hamiltonian(ctx.g, &buf) as f64;
        max = max.max(logw[s]);
    }
    let mut total = 0.0;
    for w in logw.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in logw.iter_mut() {
        *w /= total;
    }
    logw
}

/// Exact conditional marginal `mu(sigma_v = c | boundary, S)`.
pub fn marginal(
    ctx: &ExactContext,
    v: usize,
    boundary: &[(usize, Colour)],
    restriction: &Restriction,
) -> Result<ColourDistribution> {
    let n = ctx.g.n();
    let q = ctx.p.q;
    let mut buf = vec![0 as Colour; n];
    let mut weights = vec![0.0f64; q];
    let mut shift = f64::NEG_INFINITY;
    // Two passes: find the max exponent among admissible states, then sum.
    for pass in 0..2 {
        for s in 0..ctx.num_states() {
            ctx.decode(s, &mut buf);
            if boundary.iter().any(|&(u, c)| buf[u] != c) {
                continue;
            }
            let counts = colour_counts(&buf, q);
            if !restriction.allows(&buf, &counts, n) {
                continue;
            }
            let x = ctx.p.beta * hamiltonian(ctx.g, &buf) as f64;
            if pass == 0 {
                shift = shift.max(x);
            } else {
                weights[buf[v] as usize] += (x - shift).exp();
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass(
            "no state satisfies boundary and restriction".into(),
        ));
    }
    ColourDistribution::new(weights.into_iter().map(|w| w / total).collect())
}

/// Sparse single-site heat-bath kernel over the full state space.
/// `rows[s]` lists `(target, probability)` for the single-site moves;
/// `diag[s]` carries the remaining lazy mass.
pub struct GlauberKernel {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub diag: Vec<f64>,
}

/// Exact Glauber kernel: pick a uniform vertex, resample its colour from
/// the conditional given the neighbours (self-loops cancel).
pub fn glauber_kernel(ctx: &ExactContext) -> GlauberKernel {
    let n = ctx.g.n();
    let q = ctx.p.q;
    let states = ctx.num_states();
    let mut buf = vec![0 as Colour; n];
    let mut rows = vec![Vec::with_capacity(n * (q - 1)); states];
    let mut diag = vec![0.0f64; states];
    // q^v strides for single-site moves.
    let mut stride = vec![1usize; n];
    for v in 1..n {
        stride[v] = stride[v - 1] * q;
    }
    for s in 0..states {
        ctx.decode(s, &mut buf);
        for v in 0..n {
            let mut w = vec![0.0f64; q];
            for c in 0..q {
                let same = ctx
                    .g
                    .neighbours(v)
                    .iter()
                    .filter(|&&(u, _)| buf[u as usize] == c as Colour)
                    .count();
                w[c] = (ctx.p.beta * same as f64).exp();
            }
            let total: f64 = w.iter().sum();
            let cur = buf[v] as usize;
            for c in 0..q {
                let prob = w[c] / total / n as f64;
                if c == cur {
                    diag[s] += prob;
                } else {
                    let t = (s as i64 + (c as i64 - cur as i64) * stride[v] as i64) as usize;
                    rows[s].push((t as u32, prob));
                }
            }
        }
    }
    GlauberKernel { rows, diag }
}

/// Bottleneck ratio `Phi(S) = sum_{s in S, t notin S} mu(s) P(s,t) / mu(S)`.
pub fn bottleneck(kernel: &GlauberKernel, mu: &[f64], in_s: &[bool]) -> Result<f64> {
    let mass: f64 = mu
        .iter()
        .zip(in_s)
        .filter(|&(_, &m)| m)
        .map(|(&p, _)| p)
        .sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass("bottleneck of a null set".into()));
    }
    let mut flow = 0.0;
    for s in 0..mu.len() {
        if !in_s[s] {
            continue;
        }
        for &(t, p) in &kernel.rows[s] {
            if !in_s[t as usize] {
                flow += mu[s] * p;
            }
        }
    }
    Ok(flow / mass)
}

/// `|| mu_S P^t - mu_S ||_TV` for `t = 0..=t_max` by dense iteration.
pub fn tv_evolution(
    kernel: &GlauberKernel,
    mu: &[f64],
    in_s: &[bool],
    t_max: usize,
) -> Result<Vec<f64>> {
    let mass: f64 = mu
        .iter()
        .zip(in_s)
        .filter(|&(_, &m)| m)
        .map(|(&p, _)| p)
        .sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass("conditional measure on a null set".into()));
    }
    let states = mu.len();
    let mu_s: Vec<f64> = (0..states)
        .map(|s| if in_s[s] { mu[s] / mass } else { 0.0 })
        .collect();
    let mut v = mu_s.clone();
    let mut out = Vec::with_capacity(t_max + 1);
    for _t in 0..=t_max {
        let tv = 0.5
            * v.iter()
                .zip(&mu_s)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        out.push(tv);
        if _t == t_max {
            break;
        }
        let mut next = vec![0.0f64; states];
        for s in 0..states {
            let vs = v[s];
            if vs == 0.0 {
                continue;
            }
            next[s] += vs * kernel.diag[s];
            for &(t, p) in &kernel.rows[s] {
                next[t as usize] += vs * p;
            }
        }
        v = next;
    }
    Ok(out)
}

/// All perfect matchings on `m` points (m even, m <= 16), as partner
/// arrays.
fn enumerate_pairings(m: usize) -> Vec<Vec<u8>> {
    assert!(m % 2 == 0 && m <= 16);
    let mut out = Vec::new();
    let mut partner = vec![u8::MAX; m];
    fn rec(partner: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let Some(first) = partner.iter().position(|&p| p == u8::MAX) else {
            out.push(partner.clone());
            return;
        };
        for other in (first + 1)..partner.len() {
            if partner[other] == u8::MAX {
                partner[first] = other as u8;
                partner[other] = first as u8;
                rec(partner, out);
                partner[first] = u8::MAX;
                partner[other] = u8::MAX;
            }
        }
    }
    rec(&mut partner, &mut out);
    out
}

/// Exact total-variation distance between the two joint laws of the
/// Nishimori identity at the pairing model:
///
/// (i)  draw `G` proportional to `Z_S(G) Pr[G]`, then `sigma` from the
///      conditional Boltzmann distribution on `S`;
/// (ii) draw `sigma` proportional to `1{sigma in S} E[e^{beta H(sigma)}]`,
///      then `G` from the sigma-tilted graph law.
///
/// Both sides are computed by full enumeration over all `(dn-1)!!`
/// pairings and all `q^n` configurations; the identity makes the distance
/// zero up to floating-point error.
pub fn nishimori_check(n: usize, d: usize, p: &PottsParams, phase: &PhaseTarget) -> Result<f64> {
    if (n * d) % 2 != 0 {
        return Err(Error::OddHalfEdges { n, d });
    }
    if n * d > 16 {
        return Err(Error::InvalidParameter(format!(
            "pairing enumeration needs n*d <= 16, got {}",
            n * d
        )));
    }
    let states = (p.q as f64).powi(n as i32);
    if states > (1 << 22) as f64 {
        return Err(Error::StateCapExceeded {
            states,
            cap: 1 << 22,
        });
    }
    let states = states as usize;

    // Group pairings by the multigraph they project to.
    let mut graph_counts: HashMap<Vec<(u32, u32)>, u64> = HashMap::new();
    for pairing in enumerate_pairings(n * d) {
        let mut edges = Vec::with_capacity(n * d / 2);
        for h in 0..n * d {
            let q = pairing[h] as usize;
            if h < q {
                let (mut a, mut b) = ((h / d) as u32, (q / d) as u32);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                edges.push((a, b));
            }
        }
        edges.sort_unstable();
        *graph_counts.entry(edges).or_insert(0) += 1;
    }
    let total_pairings: u64 = graph_counts.values().sum();

    // Sort graphs for a deterministic iteration order.
    let mut graphs: Vec<(Vec<(u32, u32)>, u64)> = graph_counts.into_iter().collect();
    graphs.sort();

    let mut buf = vec![0 as Colour; n];
    let mut in_s = vec![false; states];
    let mut decode_cache: Vec<Vec<Colour>> = Vec::with_capacity(states);
    {
        let radix = p.q;
        for s in 0..states {
            let mut sigma = vec![0 as Colour; n];
            let mut x = s;
            for slot in sigma.iter_mut() {
                *slot = (x % radix) as Colour;
                x /= radix;
            }
            let counts = colour_counts(&sigma, p.q);
            in_s[s] = phase.contains(&counts, n);
            decode_cache.push(sigma);
        }
    }
    if !in_s.iter().any(|&b| b) {
        return Err(Error::ZeroMass("phase set is empty at this size".into()));
    }

    // Boltzmann factors e^{beta H_G(sigma)} per graph and state.
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(graphs.len());
    for (edges, _) in &graphs {
        let g = MultiGraph::from_edges(n, edges)?;
        let mut row = Vec::with_capacity(states);
        for sigma in &decode_cache {
            buf.copy_from_slice(sigma);
            row.push((p.beta * hamiltonian(&g, &buf) as f64).exp());
        }
        factors.push(row);
    }

    let m = total_pairings as f64;
    // Route (i): graph weight Z_S(G) Pr[G], then conditional on S.
    let z_s: Vec<f64> = factors
        .iter()
        .map(|row| {
            row.iter()
                .zip(&in_s)
                .filter(|&(_, &b)| b)
                .map(|(&w, _)| w)
                .sum()
        })
        .collect();
    let ez: f64 = graphs
        .iter()
        .zip(&z_s)
        .map(|((_, cnt), &z)| *cnt as f64 / m * z)
        .sum();

    // Route (ii): configuration weight E[e^{beta H(sigma)}], then the
    // tilted graph law.
    let mut e_sigma = vec![0.0f64; states];
    for ((_, cnt), row) in graphs.iter().zip(&factors) {
        let w = *cnt as f64 / m;
        for (s, &f) in row.iter().enumerate() {
            e_sigma[s] += w * f;
        }
    }
    let ez2: f64 = e_sigma
        .iter()
        .zip(&in_s)
        .filter(|&(_, &b)| b)
        .map(|(&w, _)| w)
        .sum();

    let mut tv = 0.0f64;
    for (gi, ((_, cnt), row)) in graphs.iter().zip(&factors).enumerate() {
        let pg = *cnt as f64 / m;
        for (s, &f) in row.iter().enumerate() {
            if !in_s[s] {
                continue;
            }
            // (i): [Z_S(G) Pr[G] / E Z_S] * [e^{beta H} / Z_S(G)]
            let p1 = (z_s[gi] * pg / ez) * (f / z_s[gi]);
            // (ii): [E_sigma / E Z_S] * [Pr[G] e^{beta H} / E_sigma]
            let p2 = (e_sigma[s] / ez2) * (pg * f / e_sigma[s]);
            tv += (p1 - p2).abs();
        }
    }
    Ok(0.5 * tv)
}

/// Membership table of a phase set over the state space.
pub fn phase_states(ctx: &ExactContext, target: &PhaseTarget) -> Vec<bool> {
    let n = ctx.g.n();
    let mut buf = vec![0 as Colour; n];
    (0..ctx.num_states())
        .map(|s| {
            ctx.decode(s, &mut buf);
            let counts = colour_counts(&buf, ctx.p.q);
            target.contains(&counts, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ColourDistribution;
    use crate::phase::{PhaseSpec, PhaseTarget};

    fn triangle() -> MultiGraph {
        MultiGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn params(beta: f64) -> PottsParams {
        PottsParams::new(3, 3, beta).unwrap()
    }

    #[test]
    fn hamiltonian_cases() {
        let tri = triangle();
        assert_eq!(hamiltonian(&tri, &[1, 1, 1]), 3);
        assert_eq!(hamiltonian(&tri, &[0, 0, 1]), 1);
        let double = MultiGraph::from_edges(2, &[(0, 1), (0, 1)]).unwrap();
        assert_eq!(hamiltonian(&double, &[2, 2]), 2);
        let loopy = MultiGraph::from_edges(1, &[(0, 0)]).unwrap();
        assert_eq!(hamiltonian(&loopy, &[0]), 1);
    }

    #[test]
    fn partition_function_triangle() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(2.0_f64.ln()), None).unwrap();
        let z = partition_function(&ctx, &Restriction::None).unwrap();
        assert!((z - 66.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_function_single_edge() {
        let g = MultiGraph::from_edges(2, &[(0, 1)]).unwrap();
        let ctx = ExactContext::new(&g, params(2.0_f64.ln()), None).unwrap();
        let z = partition_function(&ctx, &Restriction::None).unwrap();
        assert!((z - 12.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_function_beta_zero_limit() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(1e-14), None).unwrap();
        let z = partition_function(&ctx, &Restriction::None).unwrap();
        assert!((z - 27.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn marginal_cases() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(1.3), None).unwrap();
        // Vertex-transitive graph, no boundary: uniform.
        let m = marginal(&ctx, 0, &[], &Restriction::None).unwrap();
        for c in 0..3 {
            assert!((m.get(c) - 1.0 / 3.0).abs() < 1e-14);
        }

        // Single edge, boundary pins the partner: (1/2, 1/4, 1/4).
        let g = MultiGraph::from_edges(2, &[(0, 1)]).unwrap();
        let ctx = ExactContext::new(&g, params(2.0_f64.ln()), None).unwrap();
        let m = marginal(&ctx, 1, &[(0, 0)], &Restriction::None).unwrap();
        assert!((m.get(0) - 0.5).abs() < 1e-14);
        assert!((m.get(1) - 0.25).abs() < 1e-14);
        assert!((m.get(2) - 0.25).abs() < 1e-14);

        // beta ~ 0: boundary is irrelevant.
        let ctx = ExactContext::new(&g, params(1e-14), None).unwrap();
        let m = marginal(&ctx, 1, &[(0, 0)], &Restriction::None).unwrap();
        for c in 0..3 {
            assert!((m.get(c) - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn marginal_respects_colour_symmetry() {
        // Permuting colours globally (and in the boundary) permutes the
        // marginal.
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(0.9), None).unwrap();
        let m1 = marginal(&ctx, 2, &[(0, 0), (1, 1)], &Restriction::None).unwrap();
        let m2 = marginal(&ctx, 2, &[(0, 1), (1, 2)], &Restriction::None).unwrap();
        // Permutation 0->1, 1->2, 2->0.
        assert!((m1.get(0) - m2.get(1)).abs() < 1e-14);
        assert!((m1.get(1) - m2.get(2)).abs() < 1e-14);
        assert!((m1.get(2) - m2.get(0)).abs() < 1e-14);
    }

    #[test]
    fn glauber_kernel_is_stochastic_and_reversible() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(2.0_f64.ln()), None).unwrap();
        let kernel = glauber_kernel(&ctx);
        let mu = boltzmann(&ctx);
        let states = ctx.num_states();
        for s in 0..states {
            let row: f64 = kernel.diag[s] + kernel.rows[s].iter().map(|&(_, p)| p).sum::<f64>();
            assert!((row - 1.0).abs() < 1e-12);
        }
        // Detailed balance.
        let mut flow = HashMap::new();
        for s in 0..states {
            for &(t, p) in &kernel.rows[s] {
                flow.insert((s, t as usize), mu[s] * p);
            }
        }
        for (&(s, t), &f) in &flow {
            let back = flow[&(t, s)];
            assert!((f - back).abs() < 1e-12);
        }
        // Stationarity: mu P = mu.
        let mut next = vec![0.0; states];
        for s in 0..states {
            next[s] += mu[s] * kernel.diag[s];
            for &(t, p) in &kernel.rows[s] {
                next[t as usize] += mu[s] * p;
            }
        }
        for s in 0..states {
            assert!((next[s] - mu[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn glauber_update_law_matches_conditional_weights() {
        // Neighbour colours (0,0,1) at beta = ln 2: law (4/7, 2/7, 1/7).
        let g = MultiGraph::from_edges(4, &[(3, 0), (3, 1), (3, 2)]).unwrap();
        let ctx = ExactContext::new(&g, params(2.0_f64.ln()), None).unwrap();
        let kernel = glauber_kernel(&ctx);
        let sigma: Vec<Colour> = vec![0, 0, 1, 2];
        let s = ctx.encode(&sigma);
        // Transitions that move vertex 3.
        let stride = 27usize;
        let to0 = kernel.rows[s]
            .iter()
            .find(|&&(t, _)| t as usize == s - 2 * stride)
            .unwrap()
            .1;
        let to1 = kernel.rows[s]
            .iter()
            .find(|&&(t, _)| t as usize == s - stride)
            .unwrap()
            .1;
        assert!((to0 * 4.0 - 4.0 / 7.0).abs() < 1e-12);
        assert!((to1 * 4.0 - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn bottleneck_basics() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(1.0), None).unwrap();
        let kernel = glauber_kernel(&ctx);
        let mu = boltzmann(&ctx);
        let all = vec![true; ctx.num_states()];
        assert_eq!(bottleneck(&kernel, &mu, &all).unwrap(), 0.0);

        // Reversibility: Phi(S) mu(S) = Phi(S^c) mu(S^c).
        let target = PhaseTarget::fixed(ColourDistribution::indicator(3, 0), 0.5);
        let in_s = phase_states(&ctx, &target);
        let in_c: Vec<bool> = in_s.iter().map(|&b| !b).collect();
        let mass: f64 = mu.iter().zip(&in_s).filter(|&(_, &b)| b).map(|(&p, _)| p).sum();
        let phi_s = bottleneck(&kernel, &mu, &in_s).unwrap();
        let phi_c = bottleneck(&kernel, &mu, &in_c).unwrap();
        assert!((phi_s * mass - phi_c * (1.0 - mass)).abs() < 1e-14);
    }

    #[test]
    fn tv_evolution_obeys_bottleneck_bound() {
        let tri = triangle();
        let ctx = ExactContext::new(&tri, params(1.2), None).unwrap();
        let kernel = glauber_kernel(&ctx);
        let mu = boltzmann(&ctx);
        let target = PhaseTarget::fixed(ColourDistribution::indicator(3, 1), 0.8);
        let in_s = phase_states(&ctx, &target);
        let phi = bottleneck(&kernel, &mu, &in_s).unwrap();
        let seq = tv_evolution(&kernel, &mu, &in_s, 100).unwrap();
        assert_eq!(seq[0], 0.0);
        let mut prev = -1e-12;
        for (t, &tv) in seq.iter().enumerate() {
            assert!(tv <= t as f64 * phi + 1e-12, "bound fails at t={t}");
            assert!(tv >= prev - 1e-12, "sequence decreased at t={t}");
            prev = tv;
        }
    }

    #[test]
    fn partition_additivity_over_phases() {
        // S_para + the q ferro copies + residual recombine to Z exactly.
        let k4 = MultiGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
            .unwrap();
        let p = params(2.0);
        let ctx = ExactContext::new(&k4, p, None).unwrap();
        let para = PhaseSpec::para(0.4).resolve(&p).unwrap();
        let in_para = phase_states(&ctx, &para);
        let ferro_sets: Vec<Vec<bool>> = (0..3)
            .map(|c| {
                let t = PhaseSpec::ferro(0.3, c, false).resolve(&p).unwrap();
                phase_states(&ctx, &t)
            })
            .collect();
        // The pieces must be disjoint for additivity to make sense.
        for s in 0..ctx.num_states() {
            let mut hits = in_para[s] as u32;
            for f in &ferro_sets {
                hits += f[s] as u32;
            }
            assert!(hits <= 1, "phase pieces overlap at state {s}");
        }
        let full = partition_function(&ctx, &Restriction::None).unwrap();
        let mut parts = Vec::new();
        parts.push(partition_function(&ctx, &Restriction::Phase(&para)).unwrap());
        for c in 0..3 {
            let t = PhaseSpec::ferro(0.3, c, false).resolve(&p).unwrap();
            parts.push(partition_function(&ctx, &Restriction::Phase(&t)).unwrap());
        }
        let residual = |sigma: &[Colour]| {
            let counts = super::colour_counts(sigma, 3);
            let in_any_ferro = (0..3).any(|c| {
                PhaseSpec::ferro(0.3, c, false)
                    .resolve(&p)
                    .unwrap()
                    .contains(&counts, 4)
            });
            !para.contains(&counts, 4) && !in_any_ferro
        };
        parts.push(partition_function(&ctx, &Restriction::Predicate(&residual)).unwrap());
        // log-domain recombination.
        let max = parts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = parts.iter().map(|&z| (z - max).exp()).sum();
        let recombined = max + sum.ln();
        assert!((recombined - full).abs() < 1e-12);
    }

    #[test]
    fn nishimori_identity_tiny() {
        let p = params(2.0_f64.ln());
        let para = PhaseSpec::para(0.9).resolve(&p).unwrap();
        let tv = nishimori_check(2, 3, &p, &para).unwrap();
        assert!(tv < 1e-12, "tv = {tv}");

        let p1 = params(1.0);
        let ferro = PhaseSpec::ferro(0.5, 0, false).resolve(&p1).unwrap();
        let tv = nishimori_check(4, 3, &p1, &ferro).unwrap();
        assert!(tv < 1e-12, "tv = {tv}");

        // beta ~ 0: both sides uniform-independent.
        let p0 = params(1e-12);
        let para0 = PhaseSpec::para(0.9).resolve(&p0).unwrap();
        let tv = nishimori_check(2, 3, &p0, &para0).unwrap();
        assert!(tv < 1e-12);
    }
}
