//! Potts broadcasting on the d-regular tree and Monte Carlo estimation of
//! the non-reconstruction distance.
//!
//! The root colour is drawn from the marginal `nu^mu` of the chosen fixed
//! point; each child then receives colour `c` given its parent's colour
//! `a` with probability `mu(c) e^{beta 1{c=a}} / sum_c' mu(c') e^{beta
//! 1{c'=a}}`. The root has d children and every other internal vertex
//! d-1, matching the distance-l boundary of the d-regular tree.

use crate::dist::ColourDistribution;
use crate::error::{Error, Result};
use crate::meanfield::{marginal_map, PottsParams};
use crate::rgraph::Colour;
use crate::seeding::stream;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Broadcast experiment description: parameters, fixed-point message `mu`,
/// tree depth and Monte Carlo sample count.
#[derive(Debug, Clone)]
pub struct BroadcastSpec {
    pub params: PottsParams,
    pub mu: ColourDistribution,
    pub depth: usize,
    pub samples: usize,
}

impl BroadcastSpec {
    /// Number of boundary vertices at the target depth.
    pub fn leaf_count(&self) -> usize {
        leaf_count(self.params.d, self.depth)
    }
}

fn leaf_count(d: usize, depth: usize) -> usize {
    if depth == 0 {
        1
    } else {
        d * (d - 1).pow(depth as u32 - 1)
    }
}

/// Downward kernel and root prior of the broadcasting process.
struct Process {
    q: usize,
    d: usize,
    ///: row a = parent colour, entry c = P(child = c | parent = a).
    kernel: Vec<f64>,
    root: Vec<f64>,
}

impl Process {
    fn new(spec_params: &PottsParams, mu: &ColourDistribution) -> Process {
        let q = spec_params.q;
        let eb = spec_params.beta.exp();
        let mut kernel = vec![0.0; q * q];
        for a in 0..q {
            let norm: f64 = (0..q)
                .map(|c| mu.get(c) * if c == a { eb } else { 1.0 })
                .sum();
            for c in 0..q {
                kernel[a * q + c] = mu.get(c) * if c == a { eb } else { 1.0 } / norm;
            }
        }
        let (nu, _) = marginal_map(mu, spec_params);
        Process {
            q,
            d: spec_params.d,
            kernel,
            root: nu.probs().to_vec(),
        }
    }

    fn sample_child<R: Rng>(&self, parent: usize, rng: &mut R) -> usize {
        let row = &self.kernel[parent * self.q..(parent + 1) * self.q];
        let mut u = rng.gen::<f64>();
        for (c, &p) in row.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return c;
            }
        }
        self.q - 1
    }

    fn sample_root<R: Rng>(&self, rng: &mut R) -> usize {
        let mut u = rng.gen::<f64>();
        for (c, &p) in self.root.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return c;
            }
        }
        self.q - 1
    }

    /// Upward factor at the parent: `f(c) = sum_c' K(c'|c) m(c')`.
    fn lift(&self, child_msg: &[f64]) -> Vec<f64> {
        (0..self.q)
            .map(|c| {
                self.kernel[c * self.q..(c + 1) * self.q]
                    .iter()
                    .zip(child_msg)
                    .map(|(&k, &m)| k * m)
                    .sum()
            })
            .collect()
    }
}

fn normalise(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Forward-samples the process, returning the root colour and the colours
/// on the depth-l boundary in depth-first order.
pub fn broadcast_sample<R: Rng>(spec: &BroadcastSpec, rng: &mut R) -> (Colour, Vec<Colour>) {
    let proc = Process::new(&spec.params, &spec.mu);
    let root = proc.sample_root(rng);
    if spec.depth == 0 {
        return (root as Colour, vec![root as Colour]);
    }
    let mut leaves = Vec::with_capacity(spec.leaf_count());
    fn descend<R: Rng>(
        proc: &Process,
        colour: usize,
        depth_left: usize,
        leaves: &mut Vec<Colour>,
        rng: &mut R,
    ) {
        if depth_left == 0 {
            leaves.push(colour as Colour);
            return;
        }
        for _ in 0..proc.d - 1 {
            let child = proc.sample_child(colour, rng);
            descend(proc, child, depth_left - 1, leaves, rng);
        }
    }
    for _ in 0..proc.d {
        let child = proc.sample_child(root, rng);
        descend(&proc, child, spec.depth - 1, &mut leaves, rng);
    }
    (root as Colour, leaves)
}

/// Exact root posterior given the boundary colours, by the upward
/// sum-product recursion with per-node normalisation.
pub fn root_posterior(leaves: &[Colour], spec: &BroadcastSpec) -> Result<ColourDistribution> {
    if leaves.len() != spec.leaf_count() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} boundary colours at depth {}, got {}",
            spec.leaf_count(),
            spec.depth,
            leaves.len()
        )));
    }
    let proc = Process::new(&spec.params, &spec.mu);
    if spec.depth == 0 {
        return ColourDistribution::new(
            (0..proc.q)
                .map(|c| if c == leaves[0] as usize { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    // Consumes the slice left to right, returning the subtree message as a
    // function of the subtree root's colour.
    fn up(proc: &Process, depth_left: usize, children: usize, leaves: &mut &[Colour]) -> Vec<f64> {
        if depth_left == 0 {
            let c = leaves[0] as usize;
            *leaves = &leaves[1..];
            let mut m = vec![0.0; proc.q];
            m[c] = 1.0;
            return m;
        }
        let mut msg = vec![1.0; proc.q];
        for _ in 0..children {
            let child = up(proc, depth_left - 1, proc.d - 1, leaves);
            let factor = proc.lift(&child);
            for (m, f) in msg.iter_mut().zip(&factor) {
                *m *= f;
            }
        }
        normalise(&mut msg);
        msg
    }
    let mut cursor = leaves;
    let msg = up(&proc, spec.depth, proc.d, &mut cursor);
    let mut post: Vec<f64> = msg.iter().zip(&proc.root).map(|(&m, &p)| m * p).collect();
    normalise(&mut post);
    ColourDistribution::new(post)
}

/// One fused sample of the non-reconstruction distance
/// `sum_c |P(root = c | boundary) - nu^mu(c)|`: the boundary is sampled
/// and absorbed into the upward recursion on the fly, so memory stays
/// O(depth * q).
fn sample_distance<R: Rng>(proc: &Process, depth: usize, rng: &mut R) -> f64 {
    let root = proc.sample_root(rng);
    if depth == 0 {
        return (0..proc.q)
            .map(|c| {
                let post = if c == root { 1.0 } else { 0.0 };
                (post - proc.root[c]).abs()
            })
            .sum();
    }
    fn descend<R: Rng>(proc: &Process, colour: usize, depth_left: usize, rng: &mut R) -> Vec<f64> {
        if depth_left == 0 {
            let mut m = vec![0.0; proc.q];
            m[colour] = 1.0;
            return m;
        }
        let mut msg = vec![1.0; proc.q];
        for _ in 0..proc.d - 1 {
            let child_colour = proc.sample_child(colour, rng);
            let child_msg = descend(proc, child_colour, depth_left - 1, rng);
            let factor = proc.lift(&child_msg);
            for (m, f) in msg.iter_mut().zip(&factor) {
                *m *= f;
            }
        }
        normalise(&mut msg);
        msg
    }
    let mut msg = vec![1.0; proc.q];
    for _ in 0..proc.d {
        let child_colour = proc.sample_child(root, rng);
        let child_msg = descend(proc, child_colour, depth - 1, rng);
        let factor = proc.lift(&child_msg);
        for (m, f) in msg.iter_mut().zip(&factor) {
            *m *= f;
        }
    }
    let mut post: Vec<f64> = msg.iter().zip(&proc.root).map(|(&m, &p)| m * p).collect();
    normalise(&mut post);
    post.iter()
        .zip(&proc.root)
        .map(|(&a, &b)| (a - b).abs())
        .sum()
}

/// Analytic depth-0 distance `2 (1 - sum_c nu(c)^2)`.
pub fn zero_depth_distance(nu: &ColourDistribution) -> f64 {
    2.0 * (1.0 - nu.probs().iter().map(|&p| p * p).sum::<f64>())
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthEstimate {
    pub depth: usize,
    pub distance: f64,
    pub stderr: f64,
}

/// Monte Carlo estimates of the non-reconstruction distance per depth.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub points: Vec<DepthEstimate>,
}

/// Estimates the decay curve at depths `1..=max_depth` with `samples`
/// samples per depth (jackknife standard errors). Sample `(l, i)` runs on
/// the derived stream `(l-1)*samples + i`, so the curve is reproducible
/// and worker-count independent.
pub fn nonrec_curve(
    params: &PottsParams,
    mu: &ColourDistribution,
    max_depth: usize,
    samples: usize,
    master_seed: u64,
) -> Result<DecayCurve> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let proc = Process::new(params, mu);
    let points = (1..=max_depth)
        .map(|depth| {
            let xs: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng =
                        stream(master_seed, ((depth - 1) * samples + i) as u64);
                    sample_distance(&proc, depth, &mut rng)
                })
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let ss: f64 = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
            DepthEstimate {
                depth,
                distance: mean,
                stderr: (ss / (n * (n - 1.0))).sqrt(),
            }
        })
        .collect();
    Ok(DecayCurve { points })
}
