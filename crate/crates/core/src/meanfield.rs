//! Scalar and graph-level Belief Propagation for the Potts ferromagnet,
//! the Bethe free energy, the first/second-moment rate functionals and the
//! three critical temperatures `beta_u < beta_c < beta_h`.
//!
//! The scalar BP map acts on a colour distribution `mu`:
//!
//! ```text
//! T(mu)(c) = (1 + (e^beta - 1) mu(c))^{d-1} / sum_chi (1 + (e^beta - 1) mu(chi))^{d-1}
//! ```
//!
//! Its fixed points are the candidate pure states; the uniform
//! (paramagnetic) solution always exists and a ferromagnetic one with a
//! single dominant colour emerges for `beta > beta_u`.

use crate::dist::{ColourDistribution, EdgeDistribution};
use crate::error::{Error, Result};
use crate::rgraph::MultiGraph;
use rand::Rng;
use serde::Serialize;

/// Model parameters: q colours, degree d, inverse temperature beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PottsParams {
    pub q: usize,
    pub d: usize,
    pub beta: f64,
}

impl PottsParams {
    pub fn new(q: usize, d: usize, beta: f64) -> Result<Self> {
        if q < 3 {
            return Err(Error::InvalidParameter(format!(
                "q must be >= 3 (beta_c formula undefined at q=2), got {q}"
            )));
        }
        if d < 3 {
            return Err(Error::InvalidParameter(format!("d must be >= 3, got {d}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Self { q, d, beta })
    }

    /// `e^beta - 1`, the edge interaction strength.
    pub fn kappa(&self) -> f64 {
        self.beta.exp_m1()
    }
}

/// The three critical inverse temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub beta_u: f64,
    pub beta_c: f64,
    pub beta_h: f64,
}

/// `g(y) = (y-1)(y^{d-1} + q - 1) / (y^{d-1} - y)` for y > 1; its infimum
/// equals `e^{beta_u} - 1` and its two preimages above the infimum are the
/// `t`-coordinates of the ferromagnetic BP roots.
fn branch_ratio(q: usize, d: usize, y: f64) -> f64 {
    let yd = y.powi(d as i32 - 1);
    (y - 1.0) * (yd + q as f64 - 1.0) / (yd - y)
}

/// Golden-section minimiser of `branch_ratio` over y > 1, returning
/// (argmin, min). Unimodality holds on this family (checked by a dense
/// scan in the tests).
fn branch_ratio_minimum(q: usize, d: usize) -> (f64, f64) {
    let g = |y: f64| branch_ratio(q, d, y);
    let mut lo = 1.0 + 1e-9;
    let mut hi = 2.0;
    while g(2.0 * hi) < g(hi) {
        hi *= 2.0;
    }
    hi *= 2.0;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut dd = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(dd));
    for _ in 0..200 {
        if gc < gd {
            b = dd;
            dd = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = dd;
            gc = gd;
            dd = a + inv_phi * (b - a);
            gd = g(dd);
        }
        if b - a < 1e-14 * (1.0 + a) {
            break;
        }
    }
    lo = a;
    hi = b;
    let y = 0.5 * (lo + hi);
    (y, g(y))
}

/// The thresholds for given (q, d): `beta_h` and `beta_c` in closed form,
/// `beta_u` by minimising `branch_ratio` numerically.
pub fn thresholds(q: usize, d: usize) -> Result<Thresholds> {
    if q < 3 || d < 3 {
        return Err(Error::InvalidParameter(
            "thresholds need q >= 3 and d >= 3".into(),
        ));
    }
    let (qf, df) = (q as f64, d as f64);
    let beta_h = (1.0 + qf / (df - 2.0)).ln();
    let beta_c = ((qf - 2.0) / ((qf - 1.0).powf(1.0 - 2.0 / df) - 1.0)).ln();
    let (_, gmin) = branch_ratio_minimum(q, d);
    let beta_u = gmin.ln_1p();
    Ok(Thresholds {
        beta_u,
        beta_c,
        beta_h,
    })
}

/// One application of the scalar BP map.
pub fn bp_map(mu: &ColourDistribution, p: &PottsParams) -> ColourDistribution {
    let kappa = p.kappa();
    let phi: Vec<f64> = mu
        .probs()
        .iter()
        .map(|&m| (1.0 + kappa * m).powi(p.d as i32 - 1))
        .collect();
    let total: f64 = phi.iter().sum();
    ColourDistribution::new(phi.into_iter().map(|x| x / total).collect())
        .expect("BP image is normalised")
}

/// Max-norm defect of `mu` under the BP map.
pub fn bp_residual(mu: &ColourDistribution, p: &PottsParams) -> f64 {
    let image = bp_map(mu, p);
    mu.probs()
        .iter()
        .zip(image.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Jacobian of the BP map at `mu`.
fn bp_jacobian(mu: &ColourDistribution, p: &PottsParams) -> nalgebra::DMatrix<f64> {
    let q = p.q;
    let kappa = p.kappa();
    let phi: Vec<f64> = mu
        .probs()
        .iter()
        .map(|&m| (1.0 + kappa * m).powi(p.d as i32 - 1))
        .collect();
    let psi: Vec<f64> = mu
        .probs()
        .iter()
        .map(|&m| (1.0 + kappa * m).powi(p.d as i32 - 2))
        .collect();
    let total: f64 = phi.iter().sum();
    let scale = (p.d as f64 - 1.0) * kappa / (total * total);
    nalgebra::DMatrix::from_fn(q, q, |c, j| {
        let delta = if c == j { 1.0 } else { 0.0 };
        scale * (delta * psi[c] * total - phi[c] * psi[j])
    })
}

/// Spectral radius of the BP Jacobian at `mu`.
pub fn jacobian_radius(mu: &ColourDistribution, p: &PottsParams) -> f64 {
    bp_jacobian(mu, p)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPointKind {
    Para,
    Ferro,
}

/// A BP fixed point together with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub kind: FixedPointKind,
    pub mu: ColourDistribution,
    pub residual: f64,
    pub stable: bool,
    pub jacobian_radius: f64,
    pub bethe_value: f64,
}

/// Dominant-colour mass `x = mu_ferro(0)` of the ferromagnetic fixed
/// point, or `None` for `beta <= beta_u`.
///
/// Root finding runs in the `t = (1+kappa x)/(1+kappa (1-x)/(q-1))`
/// parametrisation, where `kappa = branch_ratio(t)` along the symmetric
/// ansatz; the ferromagnetic solution is the larger root, found by
/// bisection on the increasing branch right of the minimiser.
pub fn ferro_magnetisation(p: &PottsParams) -> Option<f64> {
    let kappa = p.kappa();
    let (t_min, g_min) = branch_ratio_minimum(p.q, p.d);
    if kappa <= g_min {
        return None;
    }
    let g = |t: f64| branch_ratio(p.q, p.d, t);
    let mut lo = t_min;
    let mut hi = t_min.max(2.0);
    while g(hi) < kappa {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < kappa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    // x = t^{d-1} / (t^{d-1} + q - 1), written overflow-safe.
    Some(1.0 / (1.0 + (p.q as f64 - 1.0) * t.powi(-(p.d as i32 - 1))))
}

/// All symmetric-ansatz fixed points: the paramagnetic one always, plus
/// the ferromagnetic one (largest dominant mass) when `beta > beta_u`.
pub fn solve_fixed_points(p: &PottsParams) -> Vec<FixedPointReport> {
    let mut out = Vec::with_capacity(2);
    let para = ColourDistribution::uniform(p.q);
    out.push(report(FixedPointKind::Para, para, p));
    if let Some(x) = ferro_magnetisation(p) {
        let mu = ColourDistribution::symmetric(p.q, 0, x);
        out.push(report(FixedPointKind::Ferro, mu, p));
    }
    out
}

fn report(kind: FixedPointKind, mu: ColourDistribution, p: &PottsParams) -> FixedPointReport {
    let radius = jacobian_radius(&mu, p);
    FixedPointReport {
        kind,
        residual: bp_residual(&mu, p),
        stable: radius < 1.0,
        jacobian_radius: radius,
        bethe_value: bethe(&mu, p),
        mu,
    }
}

/// Bethe free energy of a constant message `mu`:
/// `log sum_c (1+kappa mu(c))^d - (d/2) log(1 + kappa sum_c mu(c)^2)`.
pub fn bethe(mu: &ColourDistribution, p: &PottsParams) -> f64 {
    let kappa = p.kappa();
    let vertex: f64 = mu
        .probs()
        .iter()
        .map(|&m| (1.0 + kappa * m).powi(p.d as i32))
        .sum();
    let sq: f64 = mu.probs().iter().map(|&m| m * m).sum();
    vertex.ln() - p.d as f64 / 2.0 * (1.0 + kappa * sq).ln()
}

/// Expected Boltzmann marginals and edge statistics within the pure state
/// of `mu`:
/// `nu^mu(c) = (1+kappa mu(c))^d / Z`,
/// `rho^mu(s,t) = e^{beta 1{s=t}} mu(s) mu(t) / (1 + kappa sum mu^2)`.
///
/// Row sums of `rho^mu` equal `nu^mu` when `mu` is a BP fixed point (and
/// only then is that identity asserted).
pub fn marginal_map(
    mu: &ColourDistribution,
    p: &PottsParams,
) -> (ColourDistribution, EdgeDistribution) {
    let kappa = p.kappa();
    let eb = p.beta.exp();
    let q = p.q;
    let weights: Vec<f64> = mu
        .probs()
        .iter()
        .map(|&m| (1.0 + kappa * m).powi(p.d as i32))
        .collect();
    let total: f64 = weights.iter().sum();
    let nu = ColourDistribution::new(weights.into_iter().map(|w| w / total).collect())
        .expect("normalised by construction");
    let sq: f64 = mu.probs().iter().map(|&m| m * m).sum();
    let denom = 1.0 + kappa * sq;
    let mut rho = vec![0.0; q * q];
    for s in 0..q {
        for t in 0..q {
            let w = if s == t { eb } else { 1.0 };
            rho[s * q + t] = w * mu.get(s) * mu.get(t) / denom;
        }
    }
    let rho = EdgeDistribution::new(q, rho).expect("rho^mu is normalised");
    (nu, rho)
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// First-moment rate functional
/// `F(nu, rho) = (d-1) sum_s nu log nu - (d/2) sum_{s,t} rho log rho
///  + (d beta / 2) sum_s rho(s,s)`
/// over ordered pairs. This convention is pinned by two identities:
/// `F = log q` at the uniform product point with `beta = 0`, and
/// `F(nu^mu, rho^mu) = bethe(mu)` at BP fixed points.
pub fn first_moment_rate(
    nu: &ColourDistribution,
    rho: &EdgeDistribution,
    p: &PottsParams,
) -> Result<f64> {
    if nu.q() != p.q || rho.q() != p.q {
        return Err(Error::DimensionMismatch(
            "nu/rho size does not match params".into(),
        ));
    }
    if rho.row_sum_defect(nu) > 1e-9 {
        return Err(Error::InvalidDistribution(
            "rho row sums do not match nu".into(),
        ));
    }
    let df = p.d as f64;
    let vertex: f64 = nu.probs().iter().map(|&x| xlogx(x)).sum();
    let edge: f64 = rho.entries().iter().map(|&x| xlogx(x)).sum();
    let diag: f64 = (0..p.q).map(|s| rho.get(s, s)).sum();
    Ok((df - 1.0) * vertex - df / 2.0 * edge + df * p.beta / 2.0 * diag)
}

/// Symmetric q^4 overlap tensor `r(s,s',t,t')` with both pair contractions
/// prescribed by an edge distribution.
#[derive(Debug, Clone)]
pub struct OverlapTensor {
    q: usize,
    r: Vec<f64>,
}

impl OverlapTensor {
    pub fn new(q: usize, r: Vec<f64>) -> Result<Self> {
        if r.len() != q * q * q * q {
            return Err(Error::DimensionMismatch(format!(
                "overlap tensor has {} entries, expected q^4 = {}",
                r.len(),
                q * q * q * q
            )));
        }
        if r.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or NaN overlap entry".into(),
            ));
        }
        let t = Self { q, r };
        for s in 0..q {
            for s2 in 0..q {
                for u in 0..q {
                    for u2 in 0..q {
                        if (t.get(s, s2, u, u2) - t.get(u, u2, s, s2)).abs() > 1e-12 {
                            return Err(Error::InvalidDistribution(
                                "overlap tensor not symmetric under end swap".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    /// Product tensor `rho(s,t) rho(s',t')`.
    pub fn product_of(rho: &EdgeDistribution) -> Self {
        let q = rho.q();
        let mut r = vec![0.0; q * q * q * q];
        for s in 0..q {
            for s2 in 0..q {
                for t in 0..q {
                    for t2 in 0..q {
                        r[Self::idx(q, s, s2, t, t2)] = rho.get(s, t) * rho.get(s2, t2);
                    }
                }
            }
        }
        Self { q, r }
    }

    fn idx(q: usize, s: usize, s2: usize, t: usize, t2: usize) -> usize {
        ((s * q + s2) * q + t) * q + t2
    }

    pub fn get(&self, s: usize, s2: usize, t: usize, t2: usize) -> f64 {
        self.r[Self::idx(self.q, s, s2, t, t2)]
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// First-replica contraction `sum_{s',t'} r(s,s',t,t')`.
    pub fn first_marginal(&self) -> Vec<f64> {
        let q = self.q;
        let mut m = vec![0.0; q * q];
        for s in 0..q {
            for s2 in 0..q {
                for t in 0..q {
                    for t2 in 0..q {
                        m[s * q + t] += self.get(s, s2, t, t2);
                    }
                }
            }
        }
        m
    }

    /// Second-replica contraction `sum_{s,t} r(s,s',t,t')`.
    pub fn second_marginal(&self) -> Vec<f64> {
        let q = self.q;
        let mut m = vec![0.0; q * q];
        for s in 0..q {
            for s2 in 0..q {
                for t in 0..q {
                    for t2 in 0..q {
                        m[s2 * q + t2] += self.get(s, s2, t, t2);
                    }
                }
            }
        }
        m
    }

    /// Vertex-pair law `lambda(s,s') = sum_{t,t'} r(s,s',t,t')`.
    pub fn vertex_pair_law(&self) -> Vec<f64> {
        let q = self.q;
        let mut m = vec![0.0; q * q];
        for s in 0..q {
            for s2 in 0..q {
                for t in 0..q {
                    for t2 in 0..q {
                        m[s * q + s2] += self.get(s, s2, t, t2);
                    }
                }
            }
        }
        m
    }
}

/// Second-moment rate functional
/// `F2(rho, r) = (d-1) sum lambda log lambda - (d/2) sum r log r
///  + (d beta / 2) sum (1{s=t} + 1{s'=t'}) r(s,s',t,t')`
/// with `lambda` the vertex-pair law of `r`. The entropy convention is
/// pinned by the product-point identity `F2(rho, rho x rho) = 2 F(nu, rho)`.
pub fn second_moment_rate(
    rho: &EdgeDistribution,
    r: &OverlapTensor,
    p: &PottsParams,
) -> Result<f64> {
    let q = p.q;
    if rho.q() != q || r.q() != q {
        return Err(Error::DimensionMismatch(
            "rho/r size does not match params".into(),
        ));
    }
    let check = |m: &[f64]| -> f64 {
        m.iter()
            .zip(rho.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    if check(&r.first_marginal()) > 1e-9 || check(&r.second_marginal()) > 1e-9 {
        return Err(Error::InvalidDistribution(
            "overlap tensor contractions do not match rho".into(),
        ));
    }
    let df = p.d as f64;
    let lambda = r.vertex_pair_law();
    let vertex: f64 = lambda.iter().map(|&x| xlogx(x)).sum();
    let mut edge = 0.0;
    let mut diag = 0.0;
    for s in 0..q {
        for s2 in 0..q {
            for t in 0..q {
                for t2 in 0..q {
                    let x = r.get(s, s2, t, t2);
                    edge += xlogx(x);
                    let ind = (s == t) as u8 + (s2 == t2) as u8;
                    diag += ind as f64 * x;
                }
            }
        }
    }
    Ok((df - 1.0) * vertex - df / 2.0 * edge + df * p.beta / 2.0 * diag)
}

/// Bisects for the inverse temperature at which the paramagnetic Jacobian
/// radius crosses 1; analytically this is `beta_h`.
pub fn stability_crossing(q: usize, d: usize) -> Result<f64> {
    let th = thresholds(q, d)?;
    let uniform = ColourDistribution::uniform(q);
    let radius = |beta: f64| {
        let p = PottsParams { q, d, beta };
        jacobian_radius(&uniform, &p)
    };
    let mut lo = (th.beta_h - 1.0).max(1e-6);
    let mut hi = th.beta_h + 1.0;
    if radius(lo) >= 1.0 || radius(hi) <= 1.0 {
        return Err(Error::InvalidParameter(
            "stability crossing not bracketed".into(),
        ));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if radius(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One colour distribution per directed edge-end of a multigraph. The
/// message at half-edge slot `2e` flows from `edges[e].0` to `edges[e].1`,
/// the one at `2e + 1` the other way.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub q: usize,
    pub msgs: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn uniform(g: &MultiGraph, q: usize) -> Self {
        Self {
            q,
            msgs: vec![vec![1.0 / q as f64; q]; 2 * g.num_edges()],
        }
    }

    pub fn random<R: Rng>(g: &MultiGraph, q: usize, rng: &mut R) -> Self {
        let msgs = (0..2 * g.num_edges())
            .map(|_| {
                let raw: Vec<f64> = (0..q).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        Self { q, msgs }
    }

    /// Largest deviation of any message entry from `1/q`.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.q as f64;
        self.msgs
            .iter()
            .flatten()
            .map(|&x| (x - u).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of damped synchronous BP on a graph.
#[derive(Debug, Clone)]
pub struct GraphBpOutcome {
    pub messages: MessageSet,
    pub bethe_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Damped synchronous Belief Propagation on `g`; on convergence the Bethe
/// functional (per-vertex) is evaluated at the final messages. Returns the
/// last iterate with `converged = false` when `max_iters` is exhausted.
pub fn graph_bp(
    g: &MultiGraph,
    p: &PottsParams,
    init: MessageSet,
    damping: f64,
    max_iters: usize,
    tol: f64,
) -> Result<GraphBpOutcome> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in [0,1), got {damping}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let q = p.q;
    if init.msgs.len() != 2 * g.num_edges() || init.q != q {
        return Err(Error::DimensionMismatch(
            "message set does not match graph/params".into(),
        ));
    }
    let kappa = p.kappa();
    // Half-edge slots incident to each vertex (self-loops contribute two).
    let mut at_vertex: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        at_vertex[u as usize].push(2 * e);
        at_vertex[v as usize].push(2 * e + 1);
    }

    let mut msgs = init.msgs;
    let mut next = msgs.clone();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..max_iters {
        iterations = iter + 1;
        let mut delta = 0.0_f64;
        for slots in &at_vertex {
            for &h in slots {
                let mut prod = vec![1.0; q];
                for &h2 in slots {
                    if h2 == h {
                        continue;
                    }
                    let incoming = &msgs[h2 ^ 1];
                    for c in 0..q {
                        prod[c] *= 1.0 + kappa * incoming[c];
                    }
                }
                let total: f64 = prod.iter().sum();
                for c in 0..q {
                    let fresh = prod[c] / total;
                    let mixed = damping * msgs[h][c] + (1.0 - damping) * fresh;
                    delta = delta.max((mixed - msgs[h][c]).abs());
                    next[h][c] = mixed;
                }
            }
        }
        std::mem::swap(&mut msgs, &mut next);
        if delta < tol {
            converged = true;
            break;
        }
    }

    // Bethe functional, per vertex.
    let mut vertex_term = 0.0;
    for slots in &at_vertex {
        let mut total = 0.0;
        for c in 0..q {
            let mut prod = 1.0;
            for &h in slots {
                prod *= 1.0 + kappa * msgs[h ^ 1][c];
            }
            total += prod;
        }
        vertex_term += total.ln();
    }
    let mut edge_term = 0.0;
    for e in 0..g.num_edges() {
        let dot: f64 = (0..q).map(|c| msgs[2 * e][c] * msgs[2 * e + 1][c]).sum();
        edge_term += (1.0 + kappa * dot).ln();
    }
    let bethe_value = (vertex_term - edge_term) / g.n() as f64;
    Ok(GraphBpOutcome {
        messages: MessageSet { q, msgs },
        bethe_value,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgraph::sample_regular;
    use crate::seeding::stream;

    fn params(q: usize, d: usize, beta: f64) -> PottsParams {
        PottsParams::new(q, d, beta).unwrap()
    }

    #[test]
    fn thresholds_q3_d3() {
        let th = thresholds(3, 3).unwrap();
        // beta_u = log(1 + 2 sqrt(2)): g(y) = y + 2/y minimised at sqrt(2).
        assert!((th.beta_u - (1.0 + 2.0 * 2.0_f64.sqrt()).ln()).abs() < 1e-10);
        assert!((th.beta_c - -(2.0_f64.powf(1.0 / 3.0) - 1.0).ln()).abs() < 1e-12);
        assert!((th.beta_h - 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn thresholds_q3_d4() {
        let th = thresholds(3, 4).unwrap();
        assert!((th.beta_h - 2.5_f64.ln()).abs() < 1e-15);
        assert!((th.beta_c - (1.0 + 2.0_f64.sqrt()).ln()).abs() < 1e-12);
    }

    #[test]
    fn threshold_ordering_on_grid() {
        for q in 3..=20 {
            for d in 3..=20 {
                let th = thresholds(q, d).unwrap();
                assert!(
                    th.beta_u < th.beta_c && th.beta_c < th.beta_h,
                    "ordering fails at q={q}, d={d}: {th:?}"
                );
            }
        }
    }

    #[test]
    fn branch_ratio_is_unimodal_on_scan() {
        for (q, d) in [(3, 3), (3, 5), (5, 3), (10, 4), (20, 20)] {
            let (t_min, g_min) = branch_ratio_minimum(q, d);
            let mut prev = f64::INFINITY;
            let mut decreasing = true;
            for i in 1..=2000 {
                let y = 1.0 + i as f64 * 0.005;
                let g = branch_ratio(q, d, y);
                assert!(g >= g_min - 1e-9, "min missed at q={q},d={d},y={y}");
                if g > prev + 1e-12 && y < t_min {
                    decreasing = false;
                }
                prev = g;
            }
            assert!(decreasing, "not unimodal before minimum at q={q},d={d}");
        }
    }

    #[test]
    fn uniform_is_fixed_point() {
        let p = params(3, 3, 1.7);
        assert_eq!(bp_residual(&ColourDistribution::uniform(3), &p), 0.0);
    }

    #[test]
    fn near_indicator_nearly_fixed_at_large_beta() {
        let p = params(3, 3, 5.0);
        let mu = ColourDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(bp_residual(&mu, &p) < 1e-3);
    }

    #[test]
    fn fixed_points_by_regime() {
        // beta=1.0 < beta_u: paramagnetic only, stable.
        let reports = solve_fixed_points(&params(3, 3, 1.0));
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].kind, FixedPointKind::Para);
        assert!(reports[0].stable);

        // beta=1.38 in (beta_c, beta_h): both, both stable, x > 1/3.
        let reports = solve_fixed_points(&params(3, 3, 1.38));
        assert_eq!(reports.len(), 2);
        let ferro = &reports[1];
        assert_eq!(ferro.kind, FixedPointKind::Ferro);
        assert!(ferro.mu.get(0) > 1.0 / 3.0);
        assert!(ferro.residual < 1e-12);
        assert!(reports[0].stable && ferro.stable);
    }

    #[test]
    fn ferro_emerges_continuously_at_beta_u() {
        let th = thresholds(3, 3).unwrap();
        assert!(ferro_magnetisation(&params(3, 3, th.beta_u - 1e-6)).is_none());
        let x = ferro_magnetisation(&params(3, 3, th.beta_u + 1e-9)).unwrap();
        assert!(bp_residual(&ColourDistribution::symmetric(3, 0, x), &params(3, 3, th.beta_u + 1e-9)) < 1e-10);
        // x(beta) increases.
        let mut prev = x;
        for i in 1..=20 {
            let beta = th.beta_u + 1e-9 + i as f64 * 0.05;
            let xi = ferro_magnetisation(&params(3, 3, beta)).unwrap();
            assert!(xi > prev);
            prev = xi;
        }
    }

    #[test]
    fn bethe_uniform_q3_d3() {
        let p = params(3, 3, 2.0_f64.ln());
        let want = (64.0 / 9.0_f64).ln() - 1.5 * (4.0 / 3.0_f64).ln();
        assert!((bethe(&ColourDistribution::uniform(3), &p) - want).abs() < 1e-14);

        // beta -> 0: Bethe value at the uniform point tends to log q.
        let p_small = params(3, 3, 1e-9);
        assert!((bethe(&ColourDistribution::uniform(3), &p_small) - 3.0_f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn bethe_crossing_at_beta_c() {
        let th = thresholds(3, 3).unwrap();
        let gap = |beta: f64| {
            let p = params(3, 3, beta);
            let x = ferro_magnetisation(&p).unwrap();
            bethe(&ColourDistribution::uniform(3), &p)
                - bethe(&ColourDistribution::symmetric(3, 0, x), &p)
        };
        let mut lo = th.beta_u + 1e-6;
        let mut hi = th.beta_h;
        assert!(gap(lo) > 0.0 && gap(hi) < 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - th.beta_c).abs() < 1e-8);
    }

    #[test]
    fn marginal_map_uniform() {
        let p = params(3, 3, 2.0_f64.ln());
        let (nu, rho) = marginal_map(&ColourDistribution::uniform(3), &p);
        for c in 0..3 {
            assert!((nu.get(c) - 1.0 / 3.0).abs() < 1e-15);
        }
        let para = EdgeDistribution::para(3, 2.0_f64.ln());
        assert!(rho.tv(&para) < 1e-15);
    }

    #[test]
    fn ferro_marginal_matches_t_power() {
        // nu_ferro(1) = t^d / (t^d + q - 1) with t^{d-1} = (q-1)x/(1-x).
        let p = params(3, 3, 1.38);
        let x = ferro_magnetisation(&p).unwrap();
        let t = ((p.q as f64 - 1.0) * x / (1.0 - x)).powf(1.0 / (p.d as f64 - 1.0));
        let (nu, rho) = marginal_map(&ColourDistribution::symmetric(3, 0, x), &p);
        let want = t.powi(3) / (t.powi(3) + 2.0);
        assert!((nu.get(0) - want).abs() < 1e-12);
        assert!(rho.row_sum_defect(&nu) < 1e-12);
    }

    #[test]
    fn first_moment_calibrations() {
        // Z = q^n at beta = 0 (tiny beta here since beta > 0 is required).
        let p = params(3, 3, 1e-12);
        let nu = ColourDistribution::uniform(3);
        let rho = EdgeDistribution::product_of(&nu);
        assert!((first_moment_rate(&nu, &rho, &p).unwrap() - 3.0_f64.ln()).abs() < 1e-11);

        // Lemma-style bijection identity at both fixed points over a grid.
        for i in 0..50 {
            let beta = 1.36 + i as f64 * 0.02;
            let p = params(3, 3, beta);
            for rep in solve_fixed_points(&p) {
                let (nu, rho) = marginal_map(&rep.mu, &p);
                let f = first_moment_rate(&nu, &rho, &p).unwrap();
                assert!(
                    (f - rep.bethe_value).abs() < 1e-11,
                    "bijection identity fails at beta={beta} for {:?}",
                    rep.kind
                );
            }
        }
    }

    #[test]
    fn first_moment_rejects_inconsistent() {
        let p = params(3, 3, 1.0);
        let nu = ColourDistribution::indicator(3, 0);
        let rho = EdgeDistribution::para(3, 1.0);
        assert!(first_moment_rate(&nu, &rho, &p).is_err());
    }

    #[test]
    fn second_moment_product_point() {
        for beta in [1e-12, 0.8, 1.38, 1.9] {
            let p = params(3, 3, beta);
            for rep in solve_fixed_points(&p) {
                let (nu, rho) = marginal_map(&rep.mu, &p);
                let f1 = first_moment_rate(&nu, &rho, &p).unwrap();
                let f2 =
                    second_moment_rate(&rho, &OverlapTensor::product_of(&rho), &p).unwrap();
                assert!((f2 - 2.0 * f1).abs() < 1e-11);
            }
        }
        // beta -> 0 with everything uniform: 2 log q.
        let p = params(3, 3, 1e-12);
        let nu = ColourDistribution::uniform(3);
        let rho = EdgeDistribution::product_of(&nu);
        let f2 = second_moment_rate(&rho, &OverlapTensor::product_of(&rho), &p).unwrap();
        assert!((f2 - 2.0 * 3.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn para_radius_crosses_one_at_beta_h() {
        for (q, d) in [(3, 3), (3, 5), (5, 3), (10, 4)] {
            let th = thresholds(q, d).unwrap();
            let cross = stability_crossing(q, d).unwrap();
            assert!(
                (cross - th.beta_h).abs() < 1e-8,
                "crossing {cross} vs beta_h {} at q={q},d={d}",
                th.beta_h
            );
        }
    }

    #[test]
    fn graph_bp_uniform_fixed_point_matches_scalar_bethe() {
        let p = params(3, 3, 1.2);
        let g = sample_regular(30, 3, &mut stream(5, 0)).unwrap();
        let out = graph_bp(&g, &p, MessageSet::uniform(&g, 3), 0.5, 200, 1e-12).unwrap();
        assert!(out.converged);
        assert!(out.messages.max_deviation_from_uniform() < 1e-12);
        let scalar = bethe(&ColourDistribution::uniform(3), &p);
        assert!((out.bethe_value - scalar).abs() < 1e-10);
    }

    #[test]
    fn graph_bp_exact_on_single_edge() {
        // n=2 joined by one edge (d=1 internally), q=3, beta=ln 2:
        // Z = 12 and BP is exact on trees: bethe = (1/2) log 12.
        let g = MultiGraph::from_edges(2, &[(0, 1)]).unwrap();
        let p = params(3, 3, 2.0_f64.ln());
        let out = graph_bp(&g, &p, MessageSet::uniform(&g, 3), 0.0, 100, 1e-13).unwrap();
        assert!(out.converged);
        assert!((out.bethe_value - 0.5 * 12.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn graph_bp_converges_to_uniform_below_beta_u() {
        let p = params(3, 3, 1.0);
        let g = sample_regular(60, 3, &mut stream(8, 1)).unwrap();
        let init = MessageSet::random(&g, 3, &mut stream(8, 2));
        let out = graph_bp(&g, &p, init, 0.5, 3000, 1e-12).unwrap();
        assert!(out.converged);
        assert!(out.messages.max_deviation_from_uniform() < 1e-6);
    }
}
