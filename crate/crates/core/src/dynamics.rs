//! Glauber and Swendsen-Wang dynamics at desk scale, with incremental
//! phase-membership tracking and escape-time experiments started from the
//! planted model.

use crate::dist::{ColourDistribution, EdgeDistribution};
use crate::error::Result;
use crate::gibbs_exact::hamiltonian;
use crate::meanfield::PottsParams;
use crate::phase::PhaseTarget;
use crate::rgraph::{
    round_statistics, sample_planted, Colour, Configuration, EdgeSet, MultiGraph, UnionFind,
};
use crate::seeding::stream;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Chain state with bookkeeping kept consistent incrementally.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub sigma: Configuration,
    pub counts: Vec<u64>,
    pub hamiltonian: u64,
    pub step: u64,
}

impl ChainState {
    pub fn new(g: &MultiGraph, sigma: Configuration, q: usize) -> Self {
        let mut counts = vec![0u64; q];
        for &c in &sigma {
            counts[c as usize] += 1;
        }
        let h = hamiltonian(g, &sigma) as u64;
        Self {
            sigma,
            counts,
            hamiltonian: h,
            step: 0,
        }
    }

    /// Recomputes counts and Hamiltonian from scratch (consistency check).
    pub fn audit(&self, g: &MultiGraph, q: usize) -> bool {
        let fresh = ChainState::new(g, self.sigma.clone(), q);
        fresh.counts == self.counts && fresh.hamiltonian == self.hamiltonian
    }
}

/// Single-site heat-bath sampler. The conditional weight of colour `c` at
/// vertex `v` is `e^{beta * #(incident edge-ends to colour-c neighbours)}`;
/// self-loops contribute the same factor to every colour and cancel.
pub struct GlauberSampler<'g> {
    g: &'g MultiGraph,
    q: usize,
    exp_k: Vec<f64>,
    weights: Vec<f64>,
    same: Vec<u32>,
}

impl<'g> GlauberSampler<'g> {
    pub fn new(g: &'g MultiGraph, p: &PottsParams) -> Self {
        let d_max = (0..g.n()).map(|v| g.degree(v)).max().unwrap_or(0);
        let exp_k = (0..=d_max).map(|k| (p.beta * k as f64).exp()).collect();
        Self {
            g,
            q: p.q,
            exp_k,
            weights: vec![0.0; p.q],
            same: vec![0; p.q],
        }
    }

    /// One heat-bath update of a uniformly random vertex.
    pub fn step<R: Rng>(&mut self, state: &mut ChainState, rng: &mut R) -> (Colour, Colour) {
        let v = rng.gen_range(0..self.g.n());
        self.same.fill(0);
        for &(u, _) in self.g.neighbours(v) {
            self.same[state.sigma[u as usize] as usize] += 1;
        }
        let mut total = 0.0;
        for c in 0..self.q {
            let w = self.exp_k[self.same[c] as usize];
            self.weights[c] = w;
            total += w;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut new = self.q - 1;
        for c in 0..self.q {
            u -= self.weights[c];
            if u <= 0.0 {
                new = c;
                break;
            }
        }
        let old = state.sigma[v] as usize;
        if new != old {
            state.sigma[v] = new as Colour;
            state.counts[old] -= 1;
            state.counts[new] += 1;
            state.hamiltonian =
                (state.hamiltonian as i64 + self.same[new] as i64 - self.same[old] as i64) as u64;
        }
        state.step += 1;
        (old as Colour, new as Colour)
    }
}

/// Percolation step of Swendsen-Wang: each monochromatic edge (multi-edges
/// independently, self-loops included but inert) is retained with
/// probability `p_retain = 1 - e^{-beta}`. Returns the retained edge set
/// and its size.
pub fn sw_percolate<R: Rng>(
    g: &MultiGraph,
    sigma: &[Colour],
    p_retain: f64,
    rng: &mut R,
) -> (EdgeSet, usize) {
    let mut set = EdgeSet::empty(g.num_edges());
    let mut retained = 0usize;
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if (u == v || sigma[u as usize] == sigma[v as usize]) && rng.gen_bool(p_retain) {
            set.insert(e);
            retained += 1;
        }
    }
    (set, retained)
}

/// One Swendsen-Wang iteration: percolate monochromatic edges, then assign
/// each component of the retained graph a uniformly random colour.
pub fn sw_step<R: Rng>(g: &MultiGraph, q: usize, p_retain: f64, state: &mut ChainState, rng: &mut R) {
    let (retained, _) = sw_percolate(g, &state.sigma, p_retain, rng);
    let mut uf = UnionFind::new(g.n());
    for e in retained.iter() {
        let (u, v) = g.edges()[e];
        if u != v {
            uf.union(u as usize, v as usize);
        }
    }
    let mut comp_colour = vec![u8::MAX; g.n()];
    for v in 0..g.n() {
        let r = uf.find(v);
        if comp_colour[r] == u8::MAX {
            comp_colour[r] = rng.gen_range(0..q) as u8;
        }
        state.sigma[v] = comp_colour[r];
    }
    state.counts.fill(0);
    for &c in &state.sigma {
        state.counts[c as usize] += 1;
    }
    state.hamiltonian = hamiltonian(g, &state.sigma) as u64;
    state.step += 1;
}

/// O(1)-per-update tracker of `sum_c |counts(c) - n nu_k(c)|` over the
/// allowed dominant placements `k` of a phase target.
pub struct MembershipTracker {
    targets: Vec<Vec<f64>>,
    devs: Vec<f64>,
    eps_n: f64,
}

impl MembershipTracker {
    pub fn new(target: &PhaseTarget, counts: &[u64], n: usize) -> Self {
        let targets = target.target_counts(n);
        let devs = targets
            .iter()
            .map(|tgt| {
                counts
                    .iter()
                    .zip(tgt)
                    .map(|(&c, &t)| (c as f64 - t).abs())
                    .sum()
            })
            .collect();
        Self {
            targets,
            devs,
            eps_n: target.eps * n as f64,
        }
    }

    /// Updates after one vertex moved colour `a -> b`; `counts` is the
    /// post-move vector.
    pub fn update(&mut self, a: usize, b: usize, counts: &[u64]) {
        if a == b {
            return;
        }
        for (tgt, dev) in self.targets.iter().zip(self.devs.iter_mut()) {
            let new_a = counts[a] as f64;
            let new_b = counts[b] as f64;
            *dev += (new_a - tgt[a]).abs() - (new_a + 1.0 - tgt[a]).abs();
            *dev += (new_b - tgt[b]).abs() - (new_b - 1.0 - tgt[b]).abs();
        }
    }

    /// Recomputes every deviation from scratch (used after SW moves).
    pub fn reset(&mut self, counts: &[u64]) {
        for (tgt, dev) in self.targets.iter().zip(self.devs.iter_mut()) {
            *dev = counts
                .iter()
                .zip(tgt)
                .map(|(&c, &t)| (c as f64 - t).abs())
                .sum();
        }
    }

    pub fn is_member(&self) -> bool {
        self.devs.iter().any(|&d| d < self.eps_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Glauber,
    Sw,
}

/// Escape experiment configuration. Each trial plants a fresh
/// graph/configuration pair with the start statistics, runs the chain and
/// records the first step at which the colour counts leave the monitored
/// phase set. Glauber runs `sweeps * n` single-site steps, SW runs
/// `sweeps` iterations; membership is checked after every step.
#[derive(Clone)]
pub struct EscapeConfig {
    pub params: PottsParams,
    pub n: usize,
    pub chain: ChainKind,
    pub start_nu: ColourDistribution,
    pub start_rho: EdgeDistribution,
    pub monitor: PhaseTarget,
    pub sweeps: u64,
    pub trials: u64,
    pub master_seed: u64,
    /// Trace recording stride in steps (Glauber) or iterations (SW);
    /// `None` records nothing.
    pub record_stride: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub counts: Vec<u64>,
    pub hamiltonian: u64,
    pub member: bool,
}

/// Per-trial chain record; `escape_step` is the first recorded violation.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub trial: u64,
    pub records: Vec<TraceRecord>,
    pub escape_step: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeReport {
    pub chain: ChainKind,
    pub q: usize,
    pub d: usize,
    pub beta: f64,
    pub n: usize,
    pub sweeps_budget: u64,
    pub trials: u64,
    pub escaped: u64,
    pub escape_steps: Vec<u64>,
    pub master_seed: u64,
}

/// Runs one trial on its derived RNG stream.
pub fn escape_trial(cfg: &EscapeConfig, trial: u64) -> Result<Trace> {
    let p = cfg.params;
    let stats = round_statistics(&cfg.start_nu, &cfg.start_rho, cfg.n, p.d)?;
    let mut rng = stream(cfg.master_seed, trial);
    let (g, sigma) = sample_planted(&stats, &mut rng)?;
    let mut state = ChainState::new(&g, sigma, p.q);
    let mut tracker = MembershipTracker::new(&cfg.monitor, &state.counts, cfg.n);
    let mut records = Vec::new();
    let mut escape = None;
    let stride = cfg.record_stride;
    let record =
        |state: &ChainState, tracker: &MembershipTracker, records: &mut Vec<TraceRecord>| {
            records.push(TraceRecord {
                step: state.step,
                counts: state.counts.clone(),
                hamiltonian: state.hamiltonian,
                member: tracker.is_member(),
            });
        };
    if stride.is_some() {
        record(&state, &tracker, &mut records);
    }
    if !tracker.is_member() {
        escape = Some(0);
    }

    match cfg.chain {
        ChainKind::Glauber => {
            let mut sampler = GlauberSampler::new(&g, &p);
            let total = cfg.sweeps * cfg.n as u64;
            for step in 1..=total {
                if escape.is_some() {
                    break;
                }
                let (a, b) = sampler.step(&mut state, &mut rng);
                tracker.update(a as usize, b as usize, &state.counts);
                let exited = !tracker.is_member();
                if exited {
                    escape = Some(step);
                }
                if let Some(k) = stride {
                    if step % k == 0 || exited {
                        record(&state, &tracker, &mut records);
                    }
                }
            }
        }
        ChainKind::Sw => {
            let p_retain = -(-p.beta).exp_m1();
            for step in 1..=cfg.sweeps {
                if escape.is_some() {
                    break;
                }
                sw_step(&g, p.q, p_retain, &mut state, &mut rng);
                tracker.reset(&state.counts);
                let exited = !tracker.is_member();
                if exited {
                    escape = Some(step);
                }
                if let Some(k) = stride {
                    if step % k == 0 || exited {
                        record(&state, &tracker, &mut records);
                    }
                }
            }
        }
    }
    Ok(Trace {
        trial,
        records,
        escape_step: escape,
    })
}

/// Runs all trials (in parallel; results are ordered and independent of
/// scheduling) and aggregates the escape report.
pub fn escape_experiment(cfg: &EscapeConfig) -> Result<(EscapeReport, Vec<Trace>)> {
    let traces: Vec<Trace> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| escape_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let escape_steps: Vec<u64> = traces.iter().filter_map(|t| t.escape_step).collect();
    let report = EscapeReport {
        chain: cfg.chain,
        q: cfg.params.q,
        d: cfg.params.d,
        beta: cfg.params.beta,
        n: cfg.n,
        sweeps_budget: cfg.sweeps,
        trials: cfg.trials,
        escaped: escape_steps.len() as u64,
        escape_steps,
        master_seed: cfg.master_seed,
    };
    Ok((report, traces))
}
