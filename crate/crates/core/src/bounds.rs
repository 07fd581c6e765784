//! Closed-form convergence lower bounds and density thresholds.
//!
//! The strong-firing bounds come from the one-shot collapse argument: node `i`
//! is reset during the window `[tau, 1 - s + tau]` unless all its
//! predecessors start below `s` and it starts in `[0, s - tau) ∪ (1 - tau, 1]`,
//! which has probability `s^(d_i + 1)` under uniform initial phases.

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("s = {0} is not in (0, 1); the collapse window vanishes")]
    VacuousWindow(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no sign change of the threshold equation in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
}

/// `max(B, 1 - B + 2 tau)`.
pub fn compute_s(b: f64, tau: f64) -> Result<f64, BoundsError> {
    if !(b > 0.0 && b < 1.0) {
        return Err(BoundsError::InvalidInput(format!("B = {b} not in (0, 1)")));
    }
    if !(tau >= 0.0 && tau < 0.5) {
        return Err(BoundsError::InvalidInput(format!("tau = {tau} not in [0, 0.5)")));
    }
    let s = b.max(1.0 - b + 2.0 * tau);
    if s >= 1.0 {
        return Err(BoundsError::VacuousWindow(s));
    }
    Ok(s)
}

fn check_s(s: f64) -> Result<(), BoundsError> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::VacuousWindow(s))
    }
}

/// `P(E_i) >= 1 - s^(d + 1)`.
pub fn sf_node_bound(d: usize, s: f64) -> f64 {
    1.0 - s.powi(d as i32 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundParams {
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub k: u32,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub s: f64,
    /// `1 - sum of per-node failure probabilities`; may be negative.
    pub union: f64,
    /// `max(0, union)`.
    pub union_clamped: f64,
    pub product: f64,
    pub per_node: Vec<f64>,
    pub params: BoundParams,
    /// Nodes whose bound is vacuous (zero).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub vacuous_nodes: Vec<usize>,
}

fn aggregate(per_node: Vec<f64>, params: BoundParams) -> BoundReport {
    let union = 1.0 - per_node.iter().map(|p| 1.0 - p).sum::<f64>();
    let product = per_node.iter().product::<f64>().clamp(0.0, 1.0);
    let vacuous_nodes = per_node
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= 0.0)
        .map(|(i, _)| i)
        .collect();
    BoundReport {
        s: params.s,
        union,
        union_clamped: union.max(0.0),
        product,
        per_node,
        params,
        vacuous_nodes,
    }
}

/// Union and product bounds for strong-firing oscillators from an indegree
/// sequence.
pub fn sf_degree_bounds(degrees: &[usize], s: f64) -> Result<BoundReport, BoundsError> {
    check_s(s)?;
    let per_node = degrees.iter().map(|&d| sf_node_bound(d, s)).collect();
    Ok(aggregate(
        per_node,
        BoundParams {
            s,
            q: None,
            k: 1,
            eta: 0.0,
        },
    ))
}

pub fn sf_graph_bounds(g: &Graph, s: f64) -> Result<BoundReport, BoundsError> {
    sf_degree_bounds(&g.indegrees(), s)
}

/// Indegree above which the union bound reaches `p`:
/// `ln(1 - p) / ln s - ln n / ln s`.
pub fn delta_n(p: f64, s: f64, n: usize) -> Result<f64, BoundsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::InvalidInput(format!("p = {p} not in (0, 1)")));
    }
    check_s(s)?;
    if n == 0 {
        return Err(BoundsError::InvalidInput("n must be at least 1".into()));
    }
    let ls = s.ln();
    Ok((1.0 - p).ln() / ls - (n as f64).ln() / ls)
}

/// `delta_n(p) = intercept + slope * ln n`.
pub fn delta_n_coefficients(p: f64, s: f64) -> Result<(f64, f64), BoundsError> {
    let intercept = delta_n(p, s, 1)?;
    Ok((intercept, -1.0 / s.ln()))
}

/// `1 - exp(-(qd - k - 1)^2 / (2 qd))`, or 0 when `qd < k + 1`.
pub fn stii_node_bound(d: usize, q: f64, k: u32) -> f64 {
    1.0 - stii_node_failure_bound(d, q, k)
}

/// Tail bound `exp(-(qd - k - 1)^2 / (2 qd))` on fewer than `k` of `d`
/// neighbours being ready; 1 when `qd < k + 1`.
pub fn stii_node_failure_bound(d: usize, q: f64, k: u32) -> f64 {
    let mean = q * d as f64;
    let excess = mean - k as f64 - 1.0;
    if d == 0 || !(mean > 0.0) || excess < 0.0 {
        return 1.0;
    }
    (-(excess * excess) / (2.0 * mean)).exp()
}

/// Default per-neighbour ready probability `1 - (s + eta)` for uniform
/// initial phases.
pub fn default_ready_probability(s: f64, eta: f64) -> f64 {
    (1.0 - (s + eta)).max(0.0)
}

pub fn stii_degree_bounds(degrees: &[usize], q: &[f64], k: u32, s: f64, eta: f64) -> Result<BoundReport, BoundsError> {
    if q.len() != degrees.len() {
        return Err(BoundsError::InvalidInput("one q per node required".into()));
    }
    if k == 0 {
        return Err(BoundsError::InvalidInput("k must be at least 1".into()));
    }
    if let Some(bad) = q.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(BoundsError::InvalidInput(format!("q = {bad} not in (0, 1]")));
    }
    let per_node = degrees
        .iter()
        .zip(q)
        .map(|(&d, &qi)| stii_node_bound(d, qi, k))
        .collect();
    let q_echo = q.first().copied().filter(|first| q.iter().all(|x| x == first));
    Ok(aggregate(per_node, BoundParams { s, q: q_echo, k, eta }))
}

/// Product bound for `STII_{k, eta}` oscillators with per-node ready
/// probabilities `q`.
pub fn stii_graph_bound(g: &Graph, q: &[f64], k: u32, s: f64, eta: f64) -> Result<BoundReport, BoundsError> {
    stii_degree_bounds(&g.indegrees(), q, k, s, eta)
}

/// Required expected number of ready neighbours,
/// `k - 1 + c_n + sqrt(c_n^2 + 4 (k - 1) c_n)` with `c_n = ln n - ln(1 - p)`.
pub fn stii_degree_requirement(k: u32, n: usize, p: f64) -> Result<f64, BoundsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::InvalidInput(format!("p = {p} not in (0, 1)")));
    }
    if n == 0 || k == 0 {
        return Err(BoundsError::InvalidInput("n and k must be at least 1".into()));
    }
    let c = (n as f64).ln() - (1.0 - p).ln();
    let km1 = (k - 1) as f64;
    Ok(km1 + c + (c * c + 4.0 * km1 * c).sqrt())
}

/// Residual `1/c - RHS` of the geometric-graph threshold equation.
pub fn rgg_threshold_residual(c: f64, s: f64) -> f64 {
    let u = 2.0 / (c * s.ln());
    1.0 / c - (1.0 + u - u * (-u).ln())
}

/// Multiplied-through form `c - 1 + 2/L - (2/L) ln(-2/(c L))`, `L = ln s`.
fn threshold_scaled(c: f64, s: f64) -> f64 {
    let l = s.ln();
    c - 1.0 + 2.0 / l - (2.0 / l) * (-2.0 / (c * l)).ln()
}

pub const RGG_SCAN_LO: f64 = 1e-6;
pub const RGG_SCAN_HI: f64 = 1e3;

/// Larger root of the geometric-graph threshold equation in `c`.
///
/// Scans a log-spaced grid over `[1e-6, 1e3]` for sign changes, keeps the
/// rightmost bracket and bisects it to machine precision.
pub fn rgg_c_threshold(s: f64) -> Result<f64, BoundsError> {
    check_s(s)?;
    let steps = 4000;
    let ratio = (RGG_SCAN_HI / RGG_SCAN_LO).ln() / steps as f64;
    let grid = |i: usize| RGG_SCAN_LO * (ratio * i as f64).exp();
    let mut bracket = None;
    let mut prev = threshold_scaled(grid(0), s);
    for i in 1..=steps {
        let cur = threshold_scaled(grid(i), s);
        if prev.signum() != cur.signum() || cur == 0.0 {
            bracket = Some((grid(i - 1), grid(i)));
        }
        prev = cur;
    }
    let (mut lo, mut hi) = bracket.ok_or(BoundsError::NoRoot {
        lo: RGG_SCAN_LO,
        hi: RGG_SCAN_HI,
    })?;
    let flo = threshold_scaled(lo, s);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = threshold_scaled(mid, s);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Volume of the unit ball in `dim` dimensions, `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // Gamma(d/2 + 1) by the half-integer recurrence
    let mut gamma = if dim % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() / 2.0 };
    let mut x = if dim % 2 == 0 { 1.0 } else { 1.5 };
    while x < dim as f64 / 2.0 + 1.0 - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma
}

/// Radius giving expected degree `c ln n`, i.e. `(c ln n / (n theta))^(1/d)`.
pub fn rgg_radius_for_c(n: usize, dim: usize, c: f64) -> Result<f64, BoundsError> {
    if n < 2 || dim == 0 || !(c > 0.0) {
        return Err(BoundsError::InvalidInput("need n >= 2, dim >= 1, c > 0".into()));
    }
    let theta = unit_ball_volume(dim);
    let r = (c * (n as f64).ln() / (n as f64 * theta)).powf(1.0 / dim as f64);
    let max_r = (dim as f64).sqrt() / 2.0;
    if r > max_r {
        return Err(BoundsError::InvalidInput(format!(
            "radius {r} exceeds the torus diameter {max_r}"
        )));
    }
    Ok(r)
}

/// Large-`n` limit expression `(1 - 1/n) exp(1 / n^(1 - gamma))` for dense
/// Erdős–Rényi graphs. Not a per-graph bound; it can exceed 1.
pub fn er_limit_probability(n: usize, gamma: f64) -> Result<f64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidInput("n must be at least 2".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(BoundsError::InvalidInput(format!("gamma = {gamma} not in (0, 1)")));
    }
    let n = n as f64;
    Ok((1.0 - 1.0 / n) * (1.0 / n.powf(1.0 - gamma)).exp())
}
