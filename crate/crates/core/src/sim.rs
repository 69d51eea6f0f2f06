//! Discrete-time traffic simulation with routing on published travel-time
//! estimates.
//!
//! Each step of length `timestep`:
//! 1. every `refresh_period`, estimates are republished from the current
//!    ground-truth counts (noised in private mode);
//! 2. the ground-truth counts are snapshotted;
//! 3. vehicles whose traversal has completed move to their next edge or
//!    arrive, with traversal time `τ_e` at the snapshot count;
//! 4. new departures are drawn, routed on the current estimates, and enter
//!    their first edge.
//!
//! Paired runs share the demand stream, so vehicle `i` has the same origin,
//! destination and departure time in both.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::PrimeModulus;
use crate::laplace::{fit_inverse_cdf_poly, sample_laplace_exact, LaplaceError, LaplaceParams, NoisePolynomial, PolyFitOptions};
use crate::protocol::{run_round, PartyInput, ProtocolError};
use crate::roadnet::{RoadError, RoadNetwork};
use crate::tntp::OdDemand;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no route from node {origin} to node {destination}")]
    Unreachable { origin: usize, destination: usize },
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub type Result<T> = std::result::Result<T, SimError>;

const DEMAND_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const PROTOCOL_STREAM: u64 = 3;

/// ChaCha stream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Private,
    NonPrivate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSource {
    /// Exact Laplace samples added to the true counts.
    Exact,
    /// The full multi-party protocol, one party per vehicle on the network.
    Mpc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seconds per step.
    pub timestep: f64,
    /// Seconds during which new demand is generated.
    pub horizon: f64,
    /// Seconds between estimate refreshes.
    pub refresh_period: f64,
    /// Privacy parameter; `inf` publishes exact counts through the private path.
    pub epsilon: f64,
    pub demand_multiplier: f64,
    /// Converts the trip table's rates to vehicles per hour.
    pub demand_scale: f64,
    pub seed: u64,
    pub mode: Mode,
    pub noise: NoiseSource,
    /// The run stops at `drain_factor · horizon` even if vehicles remain.
    pub drain_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timestep: 10.0,
            horizon: 7200.0,
            refresh_period: 120.0,
            epsilon: 0.1,
            demand_multiplier: 1.0,
            demand_scale: 1.0 / 6.0,
            seed: 0,
            mode: Mode::Private,
            noise: NoiseSource::Exact,
            drain_factor: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return bad(format!("timestep must be positive, got {}", self.timestep));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        let ratio = self.refresh_period / self.timestep;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return bad(format!(
                "refresh period {} is not a multiple of the timestep {}",
                self.refresh_period, self.timestep
            ));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.noise == NoiseSource::Mpc && !self.epsilon.is_finite() {
            return bad("the protocol needs a finite epsilon".into());
        }
        if !(self.demand_multiplier > 0.0 && self.demand_multiplier.is_finite()) {
            return bad(format!("demand multiplier must be positive, got {}", self.demand_multiplier));
        }
        if !(self.demand_scale > 0.0 && self.demand_scale.is_finite()) {
            return bad(format!("demand scale must be positive, got {}", self.demand_scale));
        }
        if !(self.drain_factor >= 1.0) {
            return bad(format!("drain factor must be at least 1, got {}", self.drain_factor));
        }
        Ok(())
    }

    fn steps_per_refresh(&self) -> u64 {
        (self.refresh_period / self.timestep).round() as u64
    }

    fn demand_steps(&self) -> u64 {
        (self.horizon / self.timestep).ceil() as u64
    }

    fn max_steps(&self) -> u64 {
        (self.drain_factor * self.horizon / self.timestep).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MinCost(f64, usize);

impl Eq for MinCost {}

impl Ord for MinCost {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for MinCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost of the cheapest path from every node to `destination`, indexed by
/// node id (index 0 unused). Unreachable nodes get `inf`.
pub fn distances_to(net: &RoadNetwork, weights: &[f64], destination: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; net.node_count() + 1];
    let mut heap = BinaryHeap::new();
    dist[destination] = 0.0;
    heap.push(MinCost(0.0, destination));
    while let Some(MinCost(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &e in net.incoming(v) {
            let u = net.edge(e).tail;
            let nd = d + weights[e];
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(MinCost(nd, u));
            }
        }
    }
    dist
}

fn walk(net: &RoadNetwork, weights: &[f64], dist: &[f64], origin: usize, destination: usize) -> Option<Vec<usize>> {
    if !dist[origin].is_finite() {
        return None;
    }
    let mut path = Vec::new();
    let mut node = origin;
    while node != destination {
        let mut best: Option<(f64, usize, usize)> = None;
        for &e in net.outgoing(node) {
            let head = net.edge(e).head;
            let cost = weights[e] + dist[head];
            if !cost.is_finite() {
                continue;
            }
            best = match best {
                None => Some((cost, head, e)),
                Some((bc, bh, be)) => {
                    let tol = 1e-12 * bc.abs().max(cost.abs());
                    if cost < bc - tol || ((cost - bc).abs() <= tol && (head, e) < (bh, be)) {
                        Some((cost.min(bc), head, e))
                    } else {
                        Some((bc, bh, be))
                    }
                }
            };
        }
        let (_, head, e) = best?;
        path.push(e);
        node = head;
        if path.len() > net.edge_count() {
            return None;
        }
    }
    Some(path)
}

/// Minimum-weight route as a sequence of edge ids, and its cost. Among
/// equal-cost choices the walk prefers the smallest next node id.
pub fn shortest_path(net: &RoadNetwork, weights: &[f64], origin: usize, destination: usize) -> Result<(Vec<usize>, f64)> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(SimError::InvalidConfig(format!("edge weights must be positive, found {w}")));
    }
    let dist = distances_to(net, weights, destination);
    let path = walk(net, weights, &dist, origin, destination).ok_or(SimError::Unreachable { origin, destination })?;
    let cost = path.iter().map(|&e| weights[e]).sum();
    Ok((path, cost))
}

/// New departures for one step: `(origin, destination)` in OD-key order,
/// `count` Poisson with mean `rate · multiplier · timestep / 3600` per pair.
pub fn draw_demand<R: rand::Rng + ?Sized>(
    od: &OdDemand,
    multiplier: f64,
    timestep: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (&(o, d), &rate) in &od.rates {
        let mean = rate * multiplier * timestep / 3600.0;
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
        out.extend(std::iter::repeat((o, d)).take(n));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub departure: f64,
    pub route: Vec<usize>,
    /// `(entry, exit)` per route edge; exit is the scheduled completion.
    pub timings: Vec<(f64, f64)>,
    pub arrival: Option<f64>,
}

impl Vehicle {
    pub fn travel_time(&self) -> Option<f64> {
        self.arrival.map(|a| a - self.departure)
    }

    pub fn route_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.route.hash(&mut h);
        h.finish()
    }
}

/// Per-edge state visible to the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub time: f64,
    /// Vehicles currently on each edge.
    pub counts: Vec<u64>,
    /// Last published counts (noisy in private mode).
    pub published_counts: Vec<f64>,
    /// Last published travel times, used for routing.
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// `(min, max, mean)` over edges of hourly entries divided by hourly capacity.
pub fn utilization_report(net: &RoadNetwork, entries: &[u64], hours: f64) -> Utilization {
    if net.edge_count() == 0 {
        return Utilization::default();
    }
    let ratios: Vec<f64> = net
        .edges()
        .iter()
        .map(|e| entries[e.id] as f64 / hours / (e.delay.capacity * 3600.0))
        .collect();
    Utilization {
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: ratios.iter().sum::<f64>() / ratios.len() as f64,
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub config: SimConfig,
    pub vehicles: Vec<Vehicle>,
    /// Edge entries during the demand horizon.
    pub entries: Vec<u64>,
    pub utilization: Utilization,
    pub steps: u64,
    pub refreshes: u64,
    /// Vehicles still travelling when the run stopped.
    pub unfinished: usize,
}

impl SimOutcome {
    pub fn mean_travel_time(&self) -> f64 {
        let times: Vec<f64> = self.vehicles.iter().filter_map(Vehicle::travel_time).collect();
        if times.is_empty() {
            return 0.0;
        }
        times.iter().sum::<f64>() / times.len() as f64
    }
}

pub struct Simulation<'a> {
    net: &'a RoadNetwork,
    od: OdDemand,
    config: SimConfig,
    state: TrafficState,
    vehicles: Vec<Vehicle>,
    /// `(vehicle, route position)` due to leave their edge at each step.
    due: HashMap<u64, Vec<(usize, usize)>>,
    in_transit: usize,
    entries: Vec<u64>,
    step_index: u64,
    refreshes: u64,
    routes: HashMap<usize, Vec<f64>>,
    demand_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    protocol_rng: ChaCha8Rng,
    laplace: LaplaceParams,
    mpc_poly: Option<NoisePolynomial>,
}

impl<'a> Simulation<'a> {
    /// `od` holds rates in trip-table units; they are multiplied by
    /// `config.demand_scale` to get vehicles per hour.
    pub fn new(net: &'a RoadNetwork, od: &OdDemand, config: SimConfig) -> Result<Self> {
        config.validate()?;
        let laplace = LaplaceParams::new(config.epsilon)?;
        let mpc_poly = match (config.mode, config.noise) {
            (Mode::Private, NoiseSource::Mpc) => Some(
                fit_inverse_cdf_poly(&laplace, PolyFitOptions::default(), &PrimeModulus::mersenne521())?
                    .encoded()
                    .clone(),
            ),
            _ => None,
        };
        let m = net.edge_count();
        let free: Vec<f64> = net.edges().iter().map(|e| e.delay.t0).collect();
        Ok(Simulation {
            net,
            od: od.scaled(config.demand_scale),
            state: TrafficState {
                time: 0.0,
                counts: vec![0; m],
                published_counts: vec![0.0; m],
                estimates: free,
            },
            vehicles: Vec::new(),
            due: HashMap::new(),
            in_transit: 0,
            entries: vec![0; m],
            step_index: 0,
            refreshes: 0,
            routes: HashMap::new(),
            demand_rng: substream(config.seed, DEMAND_STREAM),
            noise_rng: substream(config.seed, NOISE_STREAM),
            protocol_rng: substream(config.seed, PROTOCOL_STREAM),
            laplace,
            mpc_poly,
            config,
        })
    }

    pub fn state(&self) -> &TrafficState {
        &self.state
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn in_transit(&self) -> usize {
        self.in_transit
    }

    fn refresh(&mut self) -> Result<()> {
        let m = self.net.edge_count();
        let published: Vec<f64> = match self.config.mode {
            Mode::NonPrivate => self.state.counts.iter().map(|&c| c as f64).collect(),
            Mode::Private => match &self.mpc_poly {
                None => {
                    let params = &self.laplace;
                    self.state
                        .counts
                        .iter()
                        .map(|&c| c as f64 + sample_laplace_exact(params, &mut self.noise_rng))
                        .collect()
                }
                Some(poly) => {
                    let mut inputs = Vec::with_capacity(self.in_transit);
                    for (e, &c) in self.state.counts.iter().enumerate() {
                        for _ in 0..c {
                            inputs.push(PartyInput::on_edge(inputs.len() + 1, e, m));
                        }
                    }
                    if inputs.len() < 3 {
                        debug!("skipping refresh at t={}: {} parties", self.state.time, inputs.len());
                        return Ok(());
                    }
                    run_round(&inputs, poly, &mut self.protocol_rng, false)?.counts
                }
            },
        };
        let mut estimates = Vec::with_capacity(m);
        for (e, &s) in published.iter().enumerate() {
            estimates.push(self.net.edge(e).delay.count_to_time(s.max(0.0))?);
        }
        self.state.published_counts = published;
        self.state.estimates = estimates;
        self.routes.clear();
        self.refreshes += 1;
        Ok(())
    }

    fn enter(&mut self, vehicle: usize, position: usize, snapshot: &[u64]) -> Result<()> {
        let now = self.state.time;
        let v = &mut self.vehicles[vehicle];
        let e = v.route[position];
        let tau = self.net.edge(e).delay.count_to_time(snapshot[e] as f64)?;
        let exit = now + tau;
        v.timings.push((now, exit));
        self.state.counts[e] += 1;
        if now < self.config.horizon {
            self.entries[e] += 1;
        }
        let due_step = ((exit / self.config.timestep) - 1e-9).ceil().max(self.step_index as f64 + 1.0) as u64;
        self.due.entry(due_step).or_default().push((vehicle, position));
        Ok(())
    }

    fn route(&mut self, origin: usize, destination: usize) -> Result<Vec<usize>> {
        let net = self.net;
        let weights = &self.state.estimates;
        let dist = self
            .routes
            .entry(destination)
            .or_insert_with(|| distances_to(net, weights, destination));
        walk(net, weights, dist, origin, destination).ok_or(SimError::Unreachable { origin, destination })
    }

    /// Advances the simulation by one timestep.
    pub fn step(&mut self) -> Result<()> {
        self.state.time = self.step_index as f64 * self.config.timestep;
        if self.step_index % self.config.steps_per_refresh() == 0 {
            self.refresh()?;
        }
        let snapshot = self.state.counts.clone();

        for (vehicle, position) in self.due.remove(&self.step_index).unwrap_or_default() {
            let e = self.vehicles[vehicle].route[position];
            self.state.counts[e] -= 1;
            if position + 1 < self.vehicles[vehicle].route.len() {
                self.enter(vehicle, position + 1, &snapshot)?;
            } else {
                self.vehicles[vehicle].arrival = Some(self.state.time);
                self.in_transit -= 1;
            }
        }

        if self.step_index < self.config.demand_steps() {
            let departures = draw_demand(&self.od, self.config.demand_multiplier, self.config.timestep, &mut self.demand_rng);
            for (origin, destination) in departures {
                let route = if origin == destination {
                    Vec::new()
                } else {
                    self.route(origin, destination)?
                };
                let id = self.vehicles.len();
                let empty = route.is_empty();
                self.vehicles.push(Vehicle {
                    id,
                    origin,
                    destination,
                    departure: self.state.time,
                    route,
                    timings: Vec::new(),
                    arrival: None,
                });
                if empty {
                    self.vehicles[id].arrival = Some(self.state.time);
                } else {
                    self.in_transit += 1;
                    self.enter(id, 0, &snapshot)?;
                }
            }
        }

        if cfg!(debug_assertions) {
            debug_assert_eq!(self.state.counts.iter().sum::<u64>() as usize, self.in_transit);
            if self.step_index % self.config.steps_per_refresh() == 0 {
                self.check_invariants();
            }
        }
        self.step_index += 1;
        Ok(())
    }

    fn check_invariants(&self) {
        let arrived = self.vehicles.iter().filter(|v| v.arrival.is_some()).count();
        assert_eq!(self.vehicles.len(), arrived + self.in_transit, "vehicle conservation");
        let mut counts = vec![0u64; self.net.edge_count()];
        for v in self.vehicles.iter().filter(|v| v.arrival.is_none()) {
            let position = v.timings.len() - 1;
            counts[v.route[position]] += 1;
        }
        assert_eq!(counts, self.state.counts, "counts match vehicle positions");
    }

    fn finished(&self) -> bool {
        self.step_index >= self.config.demand_steps() && self.in_transit == 0
    }

    /// Runs through the demand horizon and the drain phase.
    pub fn run(mut self) -> Result<SimOutcome> {
        let max_steps = self.config.max_steps();
        while !self.finished() && self.step_index < max_steps {
            self.step()?;
        }
        let hours = self.config.horizon / 3600.0;
        let utilization = utilization_report(self.net, &self.entries, hours);
        info!(
            "{:?} run: {} vehicles, {} unfinished, {} steps",
            self.config.mode,
            self.vehicles.len(),
            self.in_transit,
            self.step_index
        );
        Ok(SimOutcome {
            utilization,
            entries: self.entries,
            steps: self.step_index,
            refreshes: self.refreshes,
            unfinished: self.in_transit,
            vehicles: self.vehicles,
            config: self.config,
        })
    }
}

pub fn simulate(net: &RoadNetwork, od: &OdDemand, config: SimConfig) -> Result<SimOutcome> {
    Simulation::new(net, od, config)?.run()
}

/// Comparison of a private run against a non-private baseline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub vehicles_compared: usize,
    pub travel_time_non_private: f64,
    pub travel_time_private: f64,
    pub increase_seconds: f64,
    pub increase_percent: f64,
    pub routes_unchanged_percent: f64,
    pub no_increase_percent: f64,
    pub utilization_non_private: Utilization,
    pub utilization_private: Utilization,
}

/// Metrics over vehicles that arrive in both runs, paired by id.
pub fn compare(private: &SimOutcome, non_private: &SimOutcome) -> Metrics {
    let mut n = 0usize;
    let (mut sum_np, mut sum_p) = (0.0, 0.0);
    let (mut same_route, mut no_increase) = (0usize, 0usize);
    for (p, q) in private.vehicles.iter().zip(&non_private.vehicles) {
        debug_assert_eq!((p.origin, p.destination, p.departure), (q.origin, q.destination, q.departure));
        let (Some(tp), Some(tq)) = (p.travel_time(), q.travel_time()) else {
            continue;
        };
        n += 1;
        sum_p += tp;
        sum_np += tq;
        if p.route == q.route {
            same_route += 1;
        }
        if tp <= tq {
            no_increase += 1;
        }
    }
    if n == 0 {
        return Metrics {
            utilization_non_private: non_private.utilization,
            utilization_private: private.utilization,
            ..Default::default()
        };
    }
    let nf = n as f64;
    let (mean_np, mean_p) = (sum_np / nf, sum_p / nf);
    Metrics {
        vehicles_compared: n,
        travel_time_non_private: mean_np,
        travel_time_private: mean_p,
        increase_seconds: mean_p - mean_np,
        increase_percent: 100.0 * (mean_p - mean_np) / mean_np,
        routes_unchanged_percent: 100.0 * same_route as f64 / nf,
        no_increase_percent: 100.0 * no_increase as f64 / nf,
        utilization_non_private: non_private.utilization,
        utilization_private: private.utilization,
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub private: SimOutcome,
    pub non_private: SimOutcome,
    pub metrics: Metrics,
}

/// Runs `config` in private mode and again in non-private mode with the
/// same seed, and compares them.
pub fn run_experiment(net: &RoadNetwork, od: &OdDemand, config: &SimConfig) -> Result<Experiment> {
    let private = simulate(net, od, SimConfig { mode: Mode::Private, ..config.clone() })?;
    let non_private = simulate(net, od, SimConfig { mode: Mode::NonPrivate, ..config.clone() })?;
    let metrics = compare(&private, &non_private);
    Ok(Experiment {
        private,
        non_private,
        metrics,
    })
}
