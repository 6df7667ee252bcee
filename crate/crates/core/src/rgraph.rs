//! Random d-regular multigraphs from the pairing model, planted-model
//! sampling given colour/edge statistics, and graph/configuration
//! statistics.
//!
//! A d-regular multigraph on `n` vertices is stored as a perfect matching
//! (pairing) on the `n*d` half-edges, where half-edge `i*d + k` belongs to
//! vertex `i`. Self-loops and parallel edges are allowed; a self-loop
//! counts as one edge and contributes 2 to its vertex's degree.

use crate::dist::{ColourDistribution, EdgeDistribution};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Colour index in `0..q`.
pub type Colour = u8;

/// Length-n colour vector.
pub type Configuration = Vec<Colour>;

/// Multigraph with an edge list in canonical order.
///
/// Graphs built from a pairing are d-regular and keep the pairing around;
/// the canonical edge order is then the order of the lower half-edge index.
/// Graphs built from an explicit edge list (small test graphs may be
/// irregular) use the list order.
#[derive(Debug, Clone)]
pub struct MultiGraph {
    n: usize,
    d: usize,
    edges: Vec<(u32, u32)>,
    /// Per-vertex list of (neighbour, edge index); self-loops excluded.
    adj: Vec<Vec<(u32, u32)>>,
    /// Per-vertex self-loop count.
    loops: Vec<u32>,
    pairing: Option<Vec<u32>>,
}

impl MultiGraph {
    /// Builds the multigraph induced by an involution on `n*d` half-edges.
    pub fn from_pairing(n: usize, d: usize, pairing: Vec<u32>) -> Result<Self> {
        if pairing.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "pairing has {} entries, expected n*d = {}",
                pairing.len(),
                n * d
            )));
        }
        for (h, &p) in pairing.iter().enumerate() {
            let p = p as usize;
            if p >= n * d || p == h || pairing[p] as usize != h {
                return Err(Error::InvalidParameter(
                    "pairing is not a fixed-point-free involution".into(),
                ));
            }
        }
        let mut edges = Vec::with_capacity(n * d / 2);
        for h in 0..n * d {
            let p = pairing[h] as usize;
            if h < p {
                edges.push(((h / d) as u32, (p / d) as u32));
            }
        }
        let mut g = Self::from_edge_list(n, edges);
        g.d = d;
        g.pairing = Some(pairing);
        Ok(g)
    }

    /// Builds a graph from an explicit edge list (self-loops as `u == v`).
    /// The declared degree is the common degree if the graph is regular,
    /// otherwise 0.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
        }
        let mut g = Self::from_edge_list(n, edges.to_vec());
        let degs: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
        if let Some(&d0) = degs.first() {
            if degs.iter().all(|&d| d == d0) {
                g.d = d0;
            }
        }
        Ok(g)
    }

    fn from_edge_list(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut loops = vec![0u32; n];
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u == v {
                loops[u as usize] += 1;
            } else {
                adj[u as usize].push((v, e as u32));
                adj[v as usize].push((u, e as u32));
            }
        }
        Self {
            n,
            d: 0,
            edges,
            adj,
            loops,
            pairing: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared regular degree (0 when irregular).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order, self-loops listed once.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Proper neighbours of `v` with multiplicity, as (neighbour, edge index).
    pub fn neighbours(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[v]
    }

    pub fn loops_at(&self, v: usize) -> u32 {
        self.loops[v]
    }

    /// Degree counting self-loops twice.
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len() + 2 * self.loops[v] as usize
    }

    pub fn pairing(&self) -> Option<&[u32]> {
        self.pairing.as_deref()
    }

    /// Text format: header `n d`, then one `u v` line per edge in canonical
    /// order (0-indexed, self-loop listed once).
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.d);
        for &(u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::ParseGraph("empty graph file".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::ParseGraph("bad header".into()))?;
        let d: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::ParseGraph("bad header".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let u: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::ParseGraph(format!("bad edge line: {line}")))?;
            let v: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::ParseGraph(format!("bad edge line: {line}")))?;
            edges.push((u, v));
        }
        let mut g = Self::from_edges(n, &edges)?;
        if g.d != 0 && d != 0 && g.d != d {
            return Err(Error::ParseGraph(format!(
                "declared degree {d} does not match edge list degree {}",
                g.d
            )));
        }
        if g.d == 0 {
            g.d = d;
        }
        Ok(g)
    }
}

/// Uniformly random d-regular multigraph: a uniform perfect matching of the
/// `n*d` half-edges.
pub fn sample_regular<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<MultiGraph> {
    if n < 1 || d < 3 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and d >= 3, got n={n}, d={d}"
        )));
    }
    if (n * d) % 2 != 0 {
        return Err(Error::OddHalfEdges { n, d });
    }
    let mut half: Vec<u32> = (0..(n * d) as u32).collect();
    half.shuffle(rng);
    let mut pairing = vec![0u32; n * d];
    for pair in half.chunks_exact(2) {
        pairing[pair[0] as usize] = pair[1];
        pairing[pair[1] as usize] = pair[0];
    }
    MultiGraph::from_pairing(n, d, pairing)
}

/// Integer colour/edge counts realising target statistics on n vertices.
///
/// `edge_counts[s][t]` for `s != t` is the number of s-t edges and
/// `edge_counts[s][s]` the number of edges inside class s (a self-loop
/// counts one edge). The oriented diagonal count `2*edge_counts[s][s]`
/// matches the integrality condition that `d n rho(s,s)` be even.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerStatistics {
    pub n: usize,
    pub d: usize,
    pub vertex_counts: Vec<usize>,
    /// Row-major q*q, symmetric.
    pub edge_counts: Vec<usize>,
}

impl IntegerStatistics {
    pub fn q(&self) -> usize {
        self.vertex_counts.len()
    }

    pub fn edge_count(&self, s: usize, t: usize) -> usize {
        self.edge_counts[s * self.q() + t]
    }

    /// Checks the feasibility invariants:
    /// `2 e(s,s) + sum_{t != s} e(s,t) = d * m_s` and totals.
    pub fn validate(&self) -> Result<()> {
        let q = self.q();
        if self.vertex_counts.iter().sum::<usize>() != self.n {
            return Err(Error::InfeasibleStatistics(
                "vertex counts do not sum to n".into(),
            ));
        }
        let mut total = 0usize;
        for s in 0..q {
            for t in s..q {
                if self.edge_counts[s * q + t] != self.edge_counts[t * q + s] {
                    return Err(Error::InfeasibleStatistics(
                        "edge counts not symmetric".into(),
                    ));
                }
                total += self.edge_counts[s * q + t];
            }
        }
        if 2 * total != self.n * self.d {
            return Err(Error::InfeasibleStatistics(format!(
                "edge counts total {total}, expected d*n/2 = {}",
                self.n * self.d / 2
            )));
        }
        for s in 0..q {
            let cross: usize = (0..q)
                .filter(|&t| t != s)
                .map(|t| self.edge_counts[s * q + t])
                .sum();
            if 2 * self.edge_counts[s * q + s] + cross != self.d * self.vertex_counts[s] {
                return Err(Error::InfeasibleStatistics(format!(
                    "degree identity fails for colour {s}"
                )));
            }
        }
        Ok(())
    }

    /// Realised statistics as distributions.
    pub fn as_distributions(&self) -> (ColourDistribution, EdgeDistribution) {
        let q = self.q();
        let nu: Vec<f64> = self
            .vertex_counts
            .iter()
            .map(|&m| m as f64 / self.n as f64)
            .collect();
        let dn = (self.n * self.d) as f64;
        let mut rho = vec![0.0; q * q];
        for s in 0..q {
            for t in 0..q {
                let e = self.edge_counts[s * q + t] as f64;
                rho[s * q + t] = if s == t { 2.0 * e / dn } else { e / dn };
            }
        }
        (
            ColourDistribution::new(nu).expect("counts sum to n"),
            EdgeDistribution::new(q, rho).expect("counts sum to dn/2"),
        )
    }
}

/// Largest-remainder rounding of `total * weights` to integers summing to
/// `total`. Ties broken by index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let mut floor_sum = 0usize;
    let mut items: Vec<(usize, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let x = w * total as f64;
            let f = x.floor().max(0.0) as usize;
            floor_sum += f;
            (i, x - f as f64, f)
        })
        .collect();
    let missing = total.saturating_sub(floor_sum);
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for item in items.iter_mut().take(missing) {
        item.2 += 1;
    }
    items.sort_by_key(|&(i, _, _)| i);
    items.into_iter().map(|(_, _, f)| f).collect()
}

/// Rounds target statistics `(nu, rho)` to feasible integer counts.
///
/// Largest-remainder rounding of the vertex and unordered-pair edge
/// targets, followed by a deterministic repair pass that restores the
/// per-colour degree identities (perturbing counts by O(q^2) in total).
pub fn round_statistics(
    nu: &ColourDistribution,
    rho: &EdgeDistribution,
    n: usize,
    d: usize,
) -> Result<IntegerStatistics> {
    let q = nu.q();
    if rho.q() != q {
        return Err(Error::DimensionMismatch("nu and rho disagree on q".into()));
    }
    if rho.row_sum_defect(nu) > 1e-9 {
        return Err(Error::InvalidDistribution(
            "rho row sums do not match nu".into(),
        ));
    }
    if (n * d) % 2 != 0 {
        return Err(Error::OddHalfEdges { n, d });
    }
    let m_edges = n * d / 2;
    let vertex_counts = largest_remainder(nu.probs(), n);

    // Unordered-pair weights: rho(s,s) for the diagonal, 2 rho(s,t) for s<t.
    let mut pair_idx = Vec::new();
    let mut pair_w = Vec::new();
    for s in 0..q {
        for t in s..q {
            pair_idx.push((s, t));
            pair_w.push(if s == t {
                rho.get(s, s)
            } else {
                2.0 * rho.get(s, t)
            });
        }
    }
    let pair_counts = largest_remainder(&pair_w, m_edges);
    let mut e = vec![0usize; q * q];
    for (&(s, t), &c) in pair_idx.iter().zip(&pair_counts) {
        e[s * q + t] = c;
        e[t * q + s] = c;
    }

    // Residual half-edge budget per class once cross edges are placed.
    let residual = |e: &[usize], s: usize| -> i64 {
        let cross: i64 = (0..q)
            .filter(|&t| t != s)
            .map(|t| e[s * q + t] as i64)
            .sum();
        d as i64 * vertex_counts[s] as i64 - 2 * e[s * q + s] as i64 - cross
    };

    // Zero the diagonal, repair cross counts so every residual is a
    // non-negative even number, then fill the diagonal back in.
    for s in 0..q {
        e[s * q + s] = 0;
    }
    for _ in 0..(q * d + 4 * q * q + 16) {
        let Some(s) = (0..q).find(|&s| residual(&e, s) < 0) else {
            break;
        };
        // Shed one cross edge from the most loaded partner of s.
        let t = (0..q)
            .filter(|&t| t != s && e[s * q + t] > 0)
            .max_by_key(|&t| e[s * q + t])
            .ok_or_else(|| {
                Error::InfeasibleStatistics(format!("cannot repair degree of colour {s}"))
            })?;
        e[s * q + t] -= 1;
        e[t * q + s] -= 1;
    }
    // Parity repair: residuals sum to an even number, and flipping one
    // cross edge flips two residual parities, so odd classes pair up.
    let odd: Vec<usize> = (0..q).filter(|&s| residual(&e, s) % 2 != 0).collect();
    for pair in odd.chunks_exact(2) {
        let (s, t) = (pair[0], pair[1]);
        if residual(&e, s) > 0 && residual(&e, t) > 0 {
            e[s * q + t] += 1;
            e[t * q + s] += 1;
        } else if e[s * q + t] > 0 {
            e[s * q + t] -= 1;
            e[t * q + s] -= 1;
        } else {
            return Err(Error::InfeasibleStatistics(format!(
                "cannot repair parity of colours {s},{t}"
            )));
        }
    }
    for s in 0..q {
        let r = residual(&e, s);
        if r < 0 || r % 2 != 0 {
            return Err(Error::InfeasibleStatistics(format!(
                "degree identity unrepairable for colour {s}"
            )));
        }
        e[s * q + s] = (r / 2) as usize;
    }

    let stats = IntegerStatistics {
        n,
        d,
        vertex_counts,
        edge_counts: e,
    };
    stats.validate()?;
    Ok(stats)
}

/// Samples a graph/configuration pair with the prescribed statistics.
///
/// The configuration is a uniformly random colouring with the given colour
/// counts; given the colouring, the pairing is uniform among all pairings
/// realising the edge counts (half-edge pools per colour class are
/// shuffled, cross-class quotas matched in order, leftovers paired within
/// the class).
pub fn sample_planted<R: Rng>(
    stats: &IntegerStatistics,
    rng: &mut R,
) -> Result<(MultiGraph, Configuration)> {
    stats.validate()?;
    let q = stats.q();
    let (n, d) = (stats.n, stats.d);

    let mut vertices: Vec<u32> = (0..n as u32).collect();
    vertices.shuffle(rng);
    let mut sigma: Configuration = vec![0; n];
    let mut pools: Vec<Vec<u32>> = vec![Vec::new(); q];
    let mut cursor = 0usize;
    for s in 0..q {
        for _ in 0..stats.vertex_counts[s] {
            let v = vertices[cursor];
            cursor += 1;
            sigma[v as usize] = s as Colour;
            for k in 0..d {
                pools[s].push(v * d as u32 + k as u32);
            }
        }
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }

    let mut pairing = vec![u32::MAX; n * d];
    let mut used = vec![0usize; q];
    for s in 0..q {
        for t in (s + 1)..q {
            for _ in 0..stats.edge_count(s, t) {
                let a = pools[s][used[s]];
                let b = pools[t][used[t]];
                used[s] += 1;
                used[t] += 1;
                pairing[a as usize] = b;
                pairing[b as usize] = a;
            }
        }
    }
    for s in 0..q {
        let rest = &pools[s][used[s]..];
        debug_assert_eq!(rest.len(), 2 * stats.edge_count(s, s));
        for pair in rest.chunks_exact(2) {
            pairing[pair[0] as usize] = pair[1];
            pairing[pair[1] as usize] = pair[0];
        }
    }
    let g = MultiGraph::from_pairing(n, d, pairing)?;
    Ok((g, sigma))
}

/// Empirical colour statistics `nu^sigma` and edge statistics
/// `rho^{G,sigma}` (normalised by `2|E|`; both orientations of every edge
/// counted, a self-loop contributing 2 to its diagonal entry).
pub fn empirical_stats(
    g: &MultiGraph,
    sigma: &[Colour],
    q: usize,
) -> Result<(ColourDistribution, EdgeDistribution)> {
    if sigma.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} entries for n={}",
            sigma.len(),
            g.n()
        )));
    }
    let mut counts = vec![0usize; q];
    for &c in sigma {
        counts[c as usize] += 1;
    }
    let nu: Vec<f64> = counts.iter().map(|&c| c as f64 / g.n() as f64).collect();
    let mut ends = vec![0usize; q * q];
    for &(u, v) in g.edges() {
        let (a, b) = (sigma[u as usize] as usize, sigma[v as usize] as usize);
        ends[a * q + b] += 1;
        ends[b * q + a] += 1;
    }
    let norm = 2.0 * g.num_edges() as f64;
    let rho: Vec<f64> = ends.iter().map(|&c| c as f64 / norm).collect();
    Ok((
        ColourDistribution::new(nu)?,
        EdgeDistribution::new(q, rho)?,
    ))
}

/// Overlap matrix `nu(sigma,sigma')(c,c') = #{v: sigma_v=c, sigma'_v=c'}/n`.
pub fn overlap(sigma: &[Colour], sigma2: &[Colour], q: usize) -> Result<Vec<f64>> {
    if sigma.len() != sigma2.len() {
        return Err(Error::DimensionMismatch(
            "configurations differ in length".into(),
        ));
    }
    let mut m = vec![0.0; q * q];
    for (&a, &b) in sigma.iter().zip(sigma2) {
        m[a as usize * q + b as usize] += 1.0;
    }
    let n = sigma.len() as f64;
    for x in &mut m {
        *x /= n;
    }
    Ok(m)
}

/// Subset of the canonical edge list, bit-packed.
#[derive(Debug, Clone)]
pub struct EdgeSet {
    words: Vec<u64>,
    len: usize,
}

impl EdgeSet {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.contains(i))
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] as usize != i {
            self.parent[i] = self.parent[self.parent[i] as usize];
            i = self.parent[i] as usize;
        }
        i
    }

    pub fn union(&mut self, i: usize, j: usize) -> bool {
        let (mut a, mut b) = (self.find(i), self.find(j));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }
}

/// Connected-component statistics, largest component first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    /// Component vertex counts in descending order.
    pub sizes: Vec<usize>,
    /// Edge count per component, aligned with `sizes`.
    pub edges: Vec<usize>,
    /// `sum_{i >= 2} |C_i|^2`.
    pub sum_squares_rest: usize,
}

impl ComponentStats {
    fn from_roots(n: usize, uf: &mut UnionFind, edge_roots: &[usize]) -> Self {
        let mut size_of = vec![0usize; n];
        for v in 0..n {
            size_of[uf.find(v)] += 1;
        }
        let mut edges_of = vec![0usize; n];
        for &r in edge_roots {
            edges_of[r] += 1;
        }
        let mut comps: Vec<(usize, usize)> = (0..n)
            .filter(|&v| size_of[v] > 0)
            .map(|v| (size_of[v], edges_of[v]))
            .collect();
        comps.sort_by(|a, b| b.cmp(a));
        let sum_squares_rest = comps.iter().skip(1).map(|&(s, _)| s * s).sum();
        ComponentStats {
            sizes: comps.iter().map(|&(s, _)| s).collect(),
            edges: comps.iter().map(|&(_, e)| e).collect(),
            sum_squares_rest,
        }
    }
}

/// Components of `(V, active edges)`; isolated vertices count as size-1
/// components.
pub fn components(g: &MultiGraph, active: &EdgeSet) -> ComponentStats {
    let mut uf = UnionFind::new(g.n());
    let mut edge_roots = Vec::new();
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if active.contains(e) {
            uf.union(u as usize, v as usize);
        }
    }
    for (e, &(u, _)) in g.edges().iter().enumerate() {
        if active.contains(e) {
            edge_roots.push(uf.find(u as usize));
        }
    }
    ComponentStats::from_roots(g.n(), &mut uf, &edge_roots)
}

/// Leading-order per-vertex exponent of the probability that the pairing
/// model realises edge statistics `rho` given colour statistics `nu`:
/// `(d/2) sum_{s,t} rho(s,t) log(nu(s) nu(t) / rho(s,t))`.
pub fn log_pairing_rate(nu: &ColourDistribution, rho: &EdgeDistribution, d: usize) -> f64 {
    let q = nu.q();
    let mut acc = 0.0;
    for s in 0..q {
        for t in 0..q {
            let r = rho.get(s, t);
            if r > 0.0 {
                acc += r * (nu.get(s) * nu.get(t) / r).ln();
            }
        }
    }
    d as f64 / 2.0 * acc
}
