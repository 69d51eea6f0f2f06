//! Road networks with BPR delay functions, and the mapping from traffic
//! counts to travel times.
//!
//! For a road with delay `f(x)` at flow `x`, the steady-state count is
//! `F(x) = x f(x)` and the travel time implied by a count is
//! `τ(s) = f(F⁻¹(s))`. Delay functions are unit-agnostic: the network built
//! from TNTP files uses seconds and vehicles per second.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laplace::{sample_laplace_exact, LaplaceParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoadError {
    #[error("invalid delay function: {0}")]
    InvalidDelay(String),
    #[error("negative flow {0}")]
    NegativeFlow(f64),
    #[error("count-to-flow inversion did not converge for count {0}")]
    NonConvergence(f64),
    #[error("edge {edge} references unknown node {node}")]
    UnknownNode { edge: usize, node: usize },
    #[error("edge {0} is a self-loop")]
    SelfLoop(usize),
}

pub type Result<T> = std::result::Result<T, RoadError>;

/// `f(x) = t0 (1 + alpha (x / c)^beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayFunction {
    pub t0: f64,
    pub capacity: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DelayFunction {
    pub const DEFAULT_ALPHA: f64 = 0.15;
    pub const DEFAULT_BETA: f64 = 4.0;

    pub fn new(t0: f64, capacity: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(RoadError::InvalidDelay(format!("t0 = {t0}")));
        }
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(RoadError::InvalidDelay(format!("capacity = {capacity}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(RoadError::InvalidDelay(format!("alpha = {alpha}")));
        }
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(RoadError::InvalidDelay(format!("beta = {beta}")));
        }
        Ok(DelayFunction {
            t0,
            capacity,
            alpha,
            beta,
        })
    }

    pub fn bpr(t0: f64, capacity: f64) -> Result<Self> {
        Self::new(t0, capacity, Self::DEFAULT_ALPHA, Self::DEFAULT_BETA)
    }

    fn f(&self, x: f64) -> f64 {
        self.t0 * (1.0 + self.alpha * (x / self.capacity).powf(self.beta))
    }

    /// `f(x)`.
    pub fn travel_time(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(RoadError::NegativeFlow(x));
        }
        Ok(self.f(x))
    }

    /// `F(x) = x f(x)`.
    pub fn flow_to_count(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(RoadError::NegativeFlow(x));
        }
        Ok(x * self.f(x))
    }

    /// `F⁻¹(s)` by bisection. Negative counts are clamped to zero.
    pub fn count_to_flow(&self, s: f64) -> Result<f64> {
        if s.is_nan() || s == f64::INFINITY {
            return Err(RoadError::NonConvergence(s));
        }
        if s <= 0.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = (s / self.t0).max(f64::MIN_POSITIVE);
        while hi * self.f(hi) < s {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(RoadError::NonConvergence(s));
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if mid * self.f(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(RoadError::NonConvergence(s))
    }

    /// `τ(s) = f(F⁻¹(s))`.
    pub fn count_to_time(&self, s: f64) -> Result<f64> {
        Ok(self.f(self.count_to_flow(s)?))
    }

    /// Largest flow with `f(x) ≤ (1+δ) t0`: `c (δ/alpha)^(1/beta)`, infinite
    /// when `alpha = 0`.
    pub fn delta_capacity(&self, delta: f64) -> f64 {
        assert!(delta > 0.0, "delta must be positive");
        if self.alpha == 0.0 {
            return f64::INFINITY;
        }
        self.capacity * (delta / self.alpha).powf(1.0 / self.beta)
    }

    /// `(1+δ) c_δ t0 = F(c_δ)`.
    pub fn delta_critical_count(&self, delta: f64) -> f64 {
        (1.0 + delta) * self.delta_capacity(delta) * self.t0
    }
}

/// `(1/ε)(1/δ + 1) ln(1/p)`.
pub fn theorem1_threshold(epsilon: f64, delta: f64, p_fail: f64) -> f64 {
    assert!(epsilon > 0.0 && delta > 0.0 && p_fail > 0.0 && p_fail < 1.0);
    (1.0 / epsilon) * (1.0 / delta + 1.0) * (1.0 / p_fail).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub threshold: f64,
    /// Smallest whole count meeting the threshold.
    pub min_integer_count: u64,
    pub critical_count: f64,
    pub holds: bool,
}

/// Whether the road's δ-critical count reaches the accuracy threshold.
pub fn theorem1_condition(delay: &DelayFunction, epsilon: f64, delta: f64, p_fail: f64) -> Theorem1Check {
    let threshold = theorem1_threshold(epsilon, delta, p_fail);
    let critical_count = delay.delta_critical_count(delta);
    Theorem1Check {
        threshold,
        min_integer_count: threshold.ceil() as u64,
        critical_count,
        holds: critical_count >= threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTrial {
    pub count: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
    /// True when the count lies below `F(c_δ)`.
    pub below_critical: bool,
}

/// For each count `s`, the fraction of trials with
/// `|τ(s+Z) - τ(s)| ≤ δ τ(s)` under exact Laplace noise `Z`.
pub fn verify_theorem1<R: Rng + ?Sized>(
    delay: &DelayFunction,
    epsilon: f64,
    delta: f64,
    counts: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<AccuracyTrial>> {
    let params = LaplaceParams::new(epsilon).expect("epsilon must be positive");
    let critical = delay.delta_critical_count(delta);
    counts
        .iter()
        .map(|&s| {
            let exact = delay.count_to_time(s)?;
            let mut successes = 0;
            let mut sum = 0.0;
            let mut max = 0.0f64;
            for _ in 0..trials {
                let noisy = s + sample_laplace_exact(&params, rng);
                let rel = (delay.count_to_time(noisy)? - exact).abs() / exact;
                if rel <= delta {
                    successes += 1;
                }
                sum += rel;
                max = max.max(rel);
            }
            Ok(AccuracyTrial {
                count: s,
                trials,
                successes,
                success_rate: successes as f64 / trials as f64,
                mean_relative_error: sum / trials as f64,
                max_relative_error: max,
                below_critical: s < critical,
            })
        })
        .collect()
}

/// Fraction of trials in which `s + Z` reaches the δ-critical count.
pub fn critical_exceedance_rate<R: Rng + ?Sized>(
    delay: &DelayFunction,
    epsilon: f64,
    delta: f64,
    s: f64,
    trials: usize,
    rng: &mut R,
) -> f64 {
    let params = LaplaceParams::new(epsilon).expect("epsilon must be positive");
    let critical = delay.delta_critical_count(delta);
    let hits = (0..trials)
        .filter(|_| s + sample_laplace_exact(&params, rng) >= critical)
        .count();
    hits as f64 / trials as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub delay: DelayFunction,
    pub length: f64,
}

/// Directed road graph. Nodes are numbered `1..=node_count`; edge ids are
/// their positions in [`RoadNetwork::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    node_count: usize,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl RoadNetwork {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::build(node_count, edges, false)
    }

    pub fn with_self_loops(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::build(node_count, edges, true)
    }

    fn build(node_count: usize, mut edges: Vec<Edge>, allow_loops: bool) -> Result<Self> {
        let mut outgoing = vec![Vec::new(); node_count + 1];
        let mut incoming = vec![Vec::new(); node_count + 1];
        for (i, e) in edges.iter_mut().enumerate() {
            e.id = i;
            for node in [e.tail, e.head] {
                if node == 0 || node > node_count {
                    return Err(RoadError::UnknownNode { edge: i, node });
                }
            }
            if e.tail == e.head && !allow_loops {
                return Err(RoadError::SelfLoop(i));
            }
            outgoing[e.tail].push(i);
            incoming[e.head].push(i);
        }
        Ok(RoadNetwork {
            node_count,
            edges,
            outgoing,
            incoming,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..=self.node_count
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    /// Fraction of edges whose δ-critical count exceeds `threshold`.
    pub fn fraction_critical_above(&self, delta: f64, threshold: f64) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let above = self
            .edges
            .iter()
            .filter(|e| e.delay.delta_critical_count(delta) > threshold)
            .count();
        above as f64 / self.edges.len() as f64
    }
}
