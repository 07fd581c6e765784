//! Event-driven simulation of delayed pulse-coupled oscillators.
//!
//! Phases advance at unit rate. An oscillator reaching phase 1 fires, resets
//! to 0 and schedules a pulse on every out-edge, delivered `tau` later. On
//! delivery the receiver's phase becomes `max(0, phi + f(phi))`; if that
//! reaches 1 the receiver fires at the same instant.
//!
//! Dynamics between events are linear, so the simulator only stores, per
//! node, the time at which its phase was last zero (`anchor`) and the time at
//! which it is due to fire. All pending work lives in one binary heap keyed
//! by `(time, kind, key)`: at a shared instant every arrival is applied in
//! `(src, dst)` order (edge ids are that order) before any firing, and
//! firings run in node-index order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::prc::{weighted_wrap, Prc};

/// A pulse that lifts the phase to within this distance of 1 fires.
pub const FIRE_EPS: f64 = 1e-12;

/// Slack on the closed collapse window `[tau, 1 - s + tau]`.
const WINDOW_TOL: f64 = 1e-12;
/// Slack on the collapse evaluation instant `1 - s + 2 tau`.
const END_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event cap of {cap} exceeded at t = {t}")]
    EventCap { cap: usize, t: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone)]
pub enum PrcAssignment {
    Shared(Prc),
    /// One curve per edge id.
    PerEdge(Vec<Prc>),
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub tau: f64,
    /// Breakpoint used for the critical range and the collapse window.
    pub b: f64,
    pub prcs: PrcAssignment,
    pub rho0: f64,
    pub sync_eps: f64,
    /// Events allowed per unit of simulated time; `None` uses `100 m + 100 n`.
    pub event_cap_per_period: Option<usize>,
}

/// Critical range bound `min(B - tau, 1 - B + tau)`.
pub fn critical_range(b: f64, tau: f64) -> f64 {
    (b - tau).min(1.0 - b + tau)
}

impl ModelParams {
    /// Shared curve; `B` comes from the curve's parameters.
    pub fn new(tau: f64, prc: Prc) -> Result<Self, SimError> {
        let b = prc.params.b;
        let p = ModelParams {
            tau,
            b,
            rho0: critical_range(b, tau),
            prcs: PrcAssignment::Shared(prc),
            sync_eps: 1e-9,
            event_cap_per_period: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Per-edge curves clipped by the graph's edge weights. Unweighted graphs
    /// keep the shared curve.
    pub fn weighted(tau: f64, prc: Prc, g: &Graph) -> Result<Self, SimError> {
        let mut p = ModelParams::new(tau, prc.clone())?;
        if g.is_weighted() {
            let per_edge = g
                .edges()
                .iter()
                .map(|e| weighted_wrap(&prc, e.weight, prc.params))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimError::InvalidParams(e.to_string()))?;
            p.prcs = PrcAssignment::PerEdge(per_edge);
        }
        Ok(p)
    }

    pub fn with_rho0(mut self, rho0: f64) -> Result<Self, SimError> {
        self.rho0 = rho0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tau >= 0.0 && self.tau < 0.5) {
            return Err(SimError::InvalidParams(format!("tau = {} not in [0, 0.5)", self.tau)));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(SimError::InvalidParams(format!("B = {} not in (0, 1)", self.b)));
        }
        let bound = critical_range(self.b, self.tau);
        if !(self.rho0 > 0.0) || self.rho0 > bound {
            return Err(SimError::InvalidParams(format!(
                "rho0 = {} must lie in (0, {bound}]",
                self.rho0
            )));
        }
        if !(self.sync_eps >= 0.0) {
            return Err(SimError::InvalidParams("sync_eps must be >= 0".into()));
        }
        Ok(())
    }

    /// Collapse window complement `max(B, 1 - B + 2 tau)`.
    pub fn s(&self) -> f64 {
        self.b.max(1.0 - self.b + 2.0 * self.tau)
    }

    pub fn prc_for_edge(&self, edge: usize) -> &Prc {
        match &self.prcs {
            PrcAssignment::Shared(p) => p,
            PrcAssignment::PerEdge(v) => &v[edge],
        }
    }

    fn cap_per_period(&self, g: &Graph) -> usize {
        self.event_cap_per_period
            .unwrap_or(100 * g.edge_count() + 100 * g.node_count())
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Arrival = 0,
    Fire = 1,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: Kind,
    /// Edge id for arrivals, node id for firings.
    key: usize,
    version: u32,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.key.cmp(&other.key))
            .then(self.version.cmp(&other.version))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Fire,
    Arrive,
    /// An arrival that clamped the receiver's phase to 0.
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub kind: LogKind,
    pub node: usize,
    pub src: Option<usize>,
}

/// Renders an event log as `t,kind,node,src` CSV.
pub fn event_log_csv(log: &[LogEntry]) -> String {
    let mut out = String::from("t,kind,node,src\n");
    for e in log {
        let kind = match e.kind {
            LogKind::Fire => "fire",
            LogKind::Arrive => "arrive",
            LogKind::Reset => "reset",
        };
        let src = e.src.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{:.16e},{kind},{},{src}", e.t, e.node).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuedPulse {
    pub t: f64,
    pub src: usize,
    pub dst: usize,
}

/// Plain snapshot of a simulation: time, phases and pulses in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phases: Vec<f64>,
    /// Sorted by delivery order.
    pub queue: Vec<QueuedPulse>,
}

impl SimState {
    pub fn at_rest(phases: Vec<f64>) -> Self {
        SimState {
            t: 0.0,
            phases,
            queue: Vec::new(),
        }
    }

    /// `{"t":..,"phases":[..],"queue":[[t,src,dst],..]}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.t,
            "phases": self.phases,
            "queue": self.queue.iter().map(|q| serde_json::json!([q.t, q.src, q.dst])).collect::<Vec<_>>(),
        })
    }
}

/// Live simulation over a borrowed graph and parameter set.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    graph: &'a Graph,
    params: &'a ModelParams,
    t: f64,
    anchor: Vec<f64>,
    fire_at: Vec<f64>,
    version: Vec<u32>,
    heap: BinaryHeap<Reverse<Event>>,
    in_flight: usize,
    events: usize,
    event_limit: usize,
    log: Option<Vec<LogEntry>>,
}

impl<'a> Simulation<'a> {
    /// Starts at `t = 0` with the given phases and no pulses in flight.
    pub fn new(graph: &'a Graph, params: &'a ModelParams, phases: &[f64]) -> Result<Self, SimError> {
        Simulation::from_state(graph, params, &SimState::at_rest(phases.to_vec()))
    }

    pub fn from_state(graph: &'a Graph, params: &'a ModelParams, state: &SimState) -> Result<Self, SimError> {
        let n = graph.node_count();
        if state.phases.len() != n {
            return Err(SimError::InvalidState(format!(
                "{} phases for {n} nodes",
                state.phases.len()
            )));
        }
        if let PrcAssignment::PerEdge(v) = &params.prcs {
            if v.len() != graph.edge_count() {
                return Err(SimError::InvalidParams("per-edge PRC count does not match edge count".into()));
            }
        }
        let mut sim = Simulation {
            graph,
            params,
            t: state.t,
            anchor: vec![0.0; n],
            fire_at: vec![0.0; n],
            version: vec![0; n],
            heap: BinaryHeap::with_capacity(n + graph.edge_count()),
            in_flight: 0,
            events: 0,
            event_limit: usize::MAX,
            log: None,
        };
        for (i, &phi) in state.phases.iter().enumerate() {
            if !(0.0..=1.0).contains(&phi) {
                return Err(SimError::InvalidState(format!("phase {phi} of node {i} outside [0, 1]")));
            }
            sim.set_phase(i, phi);
        }
        for q in &state.queue {
            let edge = graph
                .edge_id(q.src, q.dst)
                .ok_or_else(|| SimError::InvalidState(format!("no edge {} -> {}", q.src, q.dst)))?;
            if !(q.t > state.t && q.t <= state.t + params.tau + END_TOL) {
                return Err(SimError::InvalidState(format!("pulse at {} not in (t, t + tau]", q.t)));
            }
            sim.heap.push(Reverse(Event {
                time: q.t,
                kind: Kind::Arrival,
                key: edge,
                version: 0,
            }));
            sim.in_flight += 1;
        }
        Ok(sim)
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> Option<&[LogEntry]> {
        self.log.as_deref()
    }

    pub fn take_log(&mut self) -> Option<Vec<LogEntry>> {
        self.log.take()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn pulses_in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn events_processed(&self) -> usize {
        self.events
    }

    pub fn phase(&self, node: usize) -> f64 {
        self.phase_at(node, self.t)
    }

    fn phase_at(&self, node: usize, t: f64) -> f64 {
        if t >= self.fire_at[node] {
            1.0
        } else {
            (t - self.anchor[node]).clamp(0.0, 1.0)
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.graph.node_count()).map(|i| self.phase(i)).collect()
    }

    pub fn spread(&self) -> f64 {
        if self.graph.node_count() == 0 {
            0.0
        } else {
            circular_spread(&self.phases()).expect("nonempty")
        }
    }

    pub fn snapshot(&self) -> SimState {
        let mut queue: Vec<Event> = self
            .heap
            .iter()
            .map(|r| r.0)
            .filter(|e| e.kind == Kind::Arrival)
            .collect();
        queue.sort();
        SimState {
            t: self.t,
            phases: self.phases(),
            queue: queue
                .into_iter()
                .map(|e| {
                    let edge = self.graph.edge(e.key);
                    QueuedPulse {
                        t: e.time,
                        src: edge.src,
                        dst: edge.dst,
                    }
                })
                .collect(),
        }
    }

    fn set_phase(&mut self, node: usize, phi: f64) {
        let t = self.t;
        self.version[node] = self.version[node].wrapping_add(1);
        if phi >= 1.0 - FIRE_EPS {
            self.anchor[node] = t - 1.0;
            self.fire_at[node] = t;
        } else {
            self.anchor[node] = t - phi;
            self.fire_at[node] = t + (1.0 - phi);
        }
        self.heap.push(Reverse(Event {
            time: self.fire_at[node],
            kind: Kind::Fire,
            key: node,
            version: self.version[node],
        }));
    }

    fn is_stale(&self, e: &Event) -> bool {
        e.kind == Kind::Fire && e.version != self.version[e.key]
    }

    /// Time of the next live event, discarding superseded firings.
    pub fn next_event_time(&mut self) -> Option<f64> {
        while let Some(Reverse(top)) = self.heap.peek() {
            if self.is_stale(top) {
                self.heap.pop();
            } else {
                return Some(top.time);
            }
        }
        None
    }

    fn record(&mut self, kind: LogKind, node: usize, src: Option<usize>) {
        if let Some(log) = self.log.as_mut() {
            log.push(LogEntry { t: self.t, kind, node, src });
        }
    }

    fn fire(&mut self, node: usize) {
        self.record(LogKind::Fire, node, None);
        self.set_phase(node, 0.0);
        let arrival = self.t + self.params.tau;
        for edge in self.graph.out_edge_ids(node) {
            self.heap.push(Reverse(Event {
                time: arrival,
                kind: Kind::Arrival,
                key: edge,
                version: 0,
            }));
            self.in_flight += 1;
        }
    }

    fn deliver(&mut self, edge_id: usize) {
        self.in_flight -= 1;
        let edge = *self.graph.edge(edge_id);
        let phi = self.phase(edge.dst);
        let f = self.params.prc_for_edge(edge_id).response(phi);
        let next = (phi + f).max(0.0).min(1.0);
        let kind = if next == 0.0 && phi > 0.0 {
            LogKind::Reset
        } else {
            LogKind::Arrive
        };
        self.record(kind, edge.dst, Some(edge.src));
        if next != phi || next >= 1.0 - FIRE_EPS {
            self.set_phase(edge.dst, next);
        }
    }

    /// Processes every event at the next event instant and returns it, or
    /// `None` when nothing is scheduled.
    pub fn step(&mut self) -> Option<f64> {
        let t = self.next_event_time()?;
        self.t = t;
        while let Some(Reverse(top)) = self.heap.peek() {
            if top.time != t {
                break;
            }
            if self.events > self.event_limit {
                break;
            }
            let e = self.heap.pop().unwrap().0;
            if self.is_stale(&e) {
                continue;
            }
            self.events += 1;
            match e.kind {
                Kind::Arrival => self.deliver(e.key),
                Kind::Fire => self.fire(e.key),
            }
        }
        Some(t)
    }

    /// Processes every instant up to and including `horizon`, then moves the
    /// clock to `horizon`.
    pub fn advance_to(&mut self, horizon: f64) -> Result<(), SimError> {
        let cap = self.event_cap(horizon);
        self.event_limit = self.event_limit.min(cap);
        while let Some(t) = self.next_event_time() {
            if t > horizon {
                break;
            }
            self.step();
            self.check_cap(cap)?;
        }
        if horizon > self.t {
            self.t = horizon;
        }
        Ok(())
    }

    fn event_cap(&self, horizon: f64) -> usize {
        let periods = horizon.max(1.0).ceil() as usize;
        self.params.cap_per_period(self.graph).saturating_mul(periods)
    }

    fn check_cap(&self, cap: usize) -> Result<(), SimError> {
        if self.events > cap {
            Err(SimError::EventCap { cap, t: self.t })
        } else {
            Ok(())
        }
    }
}

/// Functional single-step wrapper over [`Simulation::step`].
pub fn step_to_next_event(state: &SimState, g: &Graph, params: &ModelParams) -> Result<SimState, SimError> {
    let mut sim = Simulation::from_state(g, params, state)?;
    sim.step();
    Ok(sim.snapshot())
}

/// Smallest arc of the unit circle containing every phase: one minus the
/// largest gap between circularly consecutive sorted phases.
pub fn circular_spread(phases: &[f64]) -> Option<f64> {
    if phases.is_empty() {
        return None;
    }
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(1.0)).collect();
    p.sort_by(f64::total_cmp);
    let wrap = p[0] + 1.0 - p[p.len() - 1];
    let gap = p.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
    Some((1.0 - gap).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub granted: bool,
    pub time: f64,
    pub spread: f64,
    pub pulses_in_flight: usize,
}

/// Simulates `[0, 1 + 2 tau]` and grants a certificate at the first instant
/// with no pulses in flight and circular spread strictly below `rho0`.
pub fn run_one_period(phases: &[f64], g: &Graph, params: &ModelParams) -> Result<Certificate, SimError> {
    let mut sim = Simulation::new(g, params, phases)?;
    let horizon = 1.0 + 2.0 * params.tau;
    let cap = sim.event_cap(horizon);
    sim.event_limit = cap;
    let check = |sim: &Simulation| -> Option<Certificate> {
        if sim.pulses_in_flight() != 0 {
            return None;
        }
        let spread = sim.spread();
        (spread < params.rho0).then_some(Certificate {
            granted: true,
            time: sim.time(),
            spread,
            pulses_in_flight: 0,
        })
    };
    if let Some(c) = check(&sim) {
        return Ok(c);
    }
    while let Some(t) = sim.next_event_time() {
        if t > horizon {
            break;
        }
        sim.step();
        sim.check_cap(cap)?;
        if let Some(c) = check(&sim) {
            return Ok(c);
        }
    }
    sim.advance_to(horizon)?;
    Ok(Certificate {
        granted: false,
        time: horizon,
        spread: sim.spread(),
        pulses_in_flight: sim.pulses_in_flight(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncOutcome {
    pub synced: bool,
    /// First synchrony instant, or the horizon when not synced.
    pub periods_used: f64,
    pub final_spread: f64,
}

/// Runs until the spread is at most `sync_eps` with an empty queue, or the
/// clock passes `max_periods`.
pub fn run_to_synchrony(
    phases: &[f64],
    g: &Graph,
    params: &ModelParams,
    max_periods: u32,
) -> Result<SyncOutcome, SimError> {
    let mut sim = Simulation::new(g, params, phases)?;
    let horizon = max_periods.max(1) as f64;
    let cap = sim.event_cap(horizon);
    sim.event_limit = cap;
    let synced = |sim: &Simulation| sim.pulses_in_flight() == 0 && sim.spread() <= params.sync_eps;
    if synced(&sim) {
        return Ok(SyncOutcome {
            synced: true,
            periods_used: 0.0,
            final_spread: sim.spread(),
        });
    }
    while let Some(t) = sim.next_event_time() {
        if t > horizon {
            break;
        }
        sim.step();
        sim.check_cap(cap)?;
        if synced(&sim) {
            return Ok(SyncOutcome {
                synced: true,
                periods_used: sim.time(),
                final_spread: sim.spread(),
            });
        }
    }
    sim.advance_to(horizon)?;
    Ok(SyncOutcome {
        synced: false,
        periods_used: horizon,
        final_spread: sim.spread(),
    })
}

/// Per-node outcome of the one-shot collapse window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub s: f64,
    /// `[tau, 1 - s + tau]`.
    pub window: (f64, f64),
    /// Node fired or received a pulse inside the window.
    pub simulated: Vec<bool>,
    /// Static sufficient condition from the initial phases alone.
    pub predicted: Vec<bool>,
    /// State at `1 - s + 2 tau`.
    pub end_time: f64,
    pub end_spread: f64,
    pub end_in_flight: usize,
}

impl WindowReport {
    pub fn all_simulated(&self) -> bool {
        self.simulated.iter().all(|&e| e)
    }
}

/// Predicts the window event for `node` from initial phases: some
/// predecessor starts in `[s, 1]` or the node itself starts in
/// `[s - tau, 1 - tau]`.
pub fn predict_window_event(phases: &[f64], g: &Graph, node: usize, s: f64, tau: f64) -> bool {
    let own = phases[node];
    (own >= s - tau && own <= 1.0 - tau) || g.predecessors(node).iter().any(|&j| phases[j] >= s)
}

pub fn one_shot_window_check(phases: &[f64], g: &Graph, params: &ModelParams) -> Result<WindowReport, SimError> {
    let s = params.s();
    if s >= 1.0 {
        return Err(SimError::InvalidParams(format!("s = {s} leaves no collapse window")));
    }
    let tau = params.tau;
    let (lo, hi) = (tau, 1.0 - s + tau);
    let end = 1.0 - s + 2.0 * tau;
    let mut sim = Simulation::new(g, params, phases)?;
    sim.enable_log();
    sim.advance_to(end + END_TOL)?;
    let mut simulated = vec![false; g.node_count()];
    for e in sim.log().unwrap() {
        if e.t >= lo - WINDOW_TOL && e.t <= hi + WINDOW_TOL {
            simulated[e.node] = true;
        }
    }
    let predicted = (0..g.node_count())
        .map(|i| predict_window_event(phases, g, i, s, tau))
        .collect();
    Ok(WindowReport {
        s,
        window: (lo, hi),
        simulated,
        predicted,
        end_time: end,
        end_spread: sim.spread(),
        end_in_flight: sim.pulses_in_flight(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Graph};
    use crate::prc::PrcParams;

    fn sf_params(b: f64, tau: f64) -> ModelParams {
        let p = PrcParams {
            b,
            kappa: 0.05,
            eta: 0.0,
            tau,
        };
        ModelParams::new(tau, Prc::strong_firing(p)).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn two_node_hand_trace() {
        let g = Graph::complete(2);
        let params = sf_params(0.55, 0.05);
        let mut sim = Simulation::new(&g, &params, &[0.9, 0.4]).unwrap();
        sim.enable_log();
        assert!(close(sim.step().unwrap(), 0.1));
        assert_eq!(sim.pulses_in_flight(), 1);
        assert!(close(sim.step().unwrap(), 0.15));
        assert_eq!(sim.phase(1), 0.0);
        assert!(close(sim.step().unwrap(), 0.2));
        let ph = sim.phases();
        assert_eq!(ph[0], 0.0);
        assert!(close(ph[1], 0.05));
        assert_eq!(sim.pulses_in_flight(), 0);
        let kinds: Vec<_> = sim.log().unwrap().iter().map(|e| (e.kind, e.node)).collect();
        assert_eq!(
            kinds,
            vec![
                (LogKind::Fire, 0),
                (LogKind::Arrive, 1),
                (LogKind::Fire, 1),
                (LogKind::Reset, 0)
            ]
        );
    }

    #[test]
    fn functional_step_matches_simulation() {
        let g = Graph::complete(2);
        let params = sf_params(0.55, 0.05);
        let s0 = SimState::at_rest(vec![0.9, 0.4]);
        let s1 = step_to_next_event(&s0, &g, &params).unwrap();
        assert!(close(s1.t, 0.1));
        assert_eq!(s1.queue.len(), 1);
        assert_eq!((s1.queue[0].src, s1.queue[0].dst), (0, 1));
        let s2 = step_to_next_event(&s1, &g, &params).unwrap();
        let s3 = step_to_next_event(&s2, &g, &params).unwrap();
        assert!(close(s3.t, 0.2));
        assert!(s3.queue.is_empty());
        assert!(close(s3.phases[1], 0.05));
        let json = s1.to_json();
        assert_eq!(json["queue"][0][1], 0);
    }

    #[test]
    fn lone_oscillator_fires_each_period() {
        let g = Graph::isolated(1);
        let params = sf_params(0.55, 0.05);
        let mut sim = Simulation::new(&g, &params, &[0.25]).unwrap();
        assert!(close(sim.step().unwrap(), 0.75));
        assert!(close(sim.step().unwrap(), 1.75));
        assert!(close(sim.step().unwrap(), 2.75));
        assert_eq!(sim.pulses_in_flight(), 0);
    }

    #[test]
    fn inhibition_clamps_at_zero() {
        let g = Graph::from_edges(2, vec![Edge::new(0, 1)]).unwrap();
        let p = PrcParams::default();
        let params = ModelParams::new(0.05, Prc::custom("deep", |x| -x - 0.3, p)).unwrap();
        let mut sim = Simulation::new(&g, &params, &[0.95, 0.2]).unwrap();
        sim.step();
        sim.step();
        assert_eq!(sim.phase(1), 0.0);
    }

    #[test]
    fn certificate_examples() {
        let g = Graph::complete(2);
        let params = sf_params(0.55, 0.05);
        let c = run_one_period(&[0.9, 0.4], &g, &params).unwrap();
        assert!(c.granted);
        assert!(close(c.time, 0.2));
        assert!(close(c.spread, 0.05));

        let c = run_one_period(&[0.3, 0.3, 0.3], &Graph::complete(3), &params).unwrap();
        assert!(c.granted && c.time == 0.0 && c.spread == 0.0);

        let c = run_one_period(&[0.0, 0.5], &Graph::isolated(2), &params).unwrap();
        assert!(!c.granted);
        assert!(close(c.spread, 0.5));
    }

    #[test]
    fn two_cycle_keeps_its_lag() {
        // the 2-cycle has period 2: the two nodes swap lead every round and
        // never coincide
        let g = Graph::complete(2);
        let params = sf_params(0.55, 0.05);
        let out = run_to_synchrony(&[0.9, 0.4], &g, &params, 50).unwrap();
        assert!(!out.synced);
        assert!((out.final_spread - 0.05).abs() < 1e-9);
    }

    #[test]
    fn triangle_synchronizes() {
        let g = Graph::complete(3);
        let params = sf_params(0.55, 0.05);
        let out = run_to_synchrony(&[0.9, 0.4, 0.1], &g, &params, 50).unwrap();
        assert!(out.synced, "{out:?}");
    }

    #[test]
    fn synchrony_trivial_cases() {
        let params = sf_params(0.55, 0.05);
        let out = run_to_synchrony(&[0.4, 0.4], &Graph::complete(2), &params, 5).unwrap();
        assert!(out.synced && out.periods_used == 0.0);
        let out = run_to_synchrony(&[0.1, 0.6], &Graph::isolated(2), &params, 20).unwrap();
        assert!(!out.synced);
    }

    #[test]
    fn spread_examples() {
        assert!(close(circular_spread(&[0.95, 0.05]).unwrap(), 0.1));
        assert!(close(circular_spread(&[0.0, 0.5]).unwrap(), 0.5));
        assert!(close(circular_spread(&[0.0, 0.4, 0.8]).unwrap(), 0.6));
        assert_eq!(circular_spread(&[0.3]).unwrap(), 0.0);
        assert!(circular_spread(&[]).is_none());
    }

    #[test]
    fn window_examples() {
        let params = sf_params(0.55, 0.05);
        // star with hub 0
        let n = 6;
        let edges = (1..n).flat_map(|i| [Edge::new(0, i), Edge::new(i, 0)]).collect();
        let star = Graph::from_edges(n, edges).unwrap();
        let mut phases = vec![0.0; n];
        phases[0] = 0.99;
        let r = one_shot_window_check(&phases, &star, &params).unwrap();
        assert!(r.simulated[1..].iter().all(|&e| e));
        assert!(r.predicted[1..].iter().all(|&e| e));

        let lone = Graph::isolated(1);
        let r = one_shot_window_check(&[0.0], &lone, &params).unwrap();
        assert!(!r.simulated[0] && !r.predicted[0]);

        let pair = Graph::from_edges(2, vec![Edge::new(0, 1)]).unwrap();
        let r = one_shot_window_check(&[0.55, 0.0], &pair, &params).unwrap();
        assert!(r.predicted[1] && r.simulated[1]);
    }

    #[test]
    fn window_rejects_degenerate_s() {
        let p = PrcParams {
            b: 0.9,
            kappa: 0.05,
            eta: 0.0,
            tau: 0.1,
        };
        let params = ModelParams::new(0.1, Prc::strong_firing(p)).unwrap();
        assert!(params.s() < 1.0);
        // B in (tau, 2 tau] pushes s to at least 1
        let p = PrcParams { b: 0.5, tau: 0.3, ..p };
        let params = ModelParams::new(0.3, Prc::strong_firing(p)).unwrap();
        assert!(params.s() >= 1.0);
        assert!(one_shot_window_check(&[0.1], &Graph::isolated(1), &params).is_err());
    }

    #[test]
    fn runaway_cascade_hits_cap() {
        // zero delay plus a curve that excites phase 0 loops forever
        let p = PrcParams { tau: 0.0, ..PrcParams::default() };
        let params = ModelParams::new(0.0, Prc::custom("loop", |x| 1.0 - x, p)).unwrap();
        let g = Graph::complete(2);
        let err = run_to_synchrony(&[0.9, 0.1], &g, &params, 5).unwrap_err();
        assert!(matches!(err, SimError::EventCap { .. }));
    }

    #[test]
    fn params_validation() {
        let p = PrcParams::default();
        assert!(ModelParams::new(0.5, Prc::strong_firing(p)).is_err());
        let mp = ModelParams::new(0.05, Prc::strong_firing(p)).unwrap();
        assert!((mp.rho0 - 0.5).abs() < 1e-15);
        assert!(mp.clone().with_rho0(0.6).is_err());
        assert!(mp.with_rho0(0.3).is_ok());
    }

    #[test]
    fn weighted_params_clip_per_edge() {
        let g = crate::graph::parse_edge_list("0,1,0.1\n1,0\n").unwrap();
        let p = PrcParams::default();
        let params = ModelParams::weighted(0.05, Prc::strong_firing(p), &g).unwrap();
        assert!((params.prc_for_edge(0).response(0.3) + 0.1).abs() < 1e-15);
        assert!((params.prc_for_edge(1).response(0.3) + 0.3).abs() < 1e-15);
        let mut sim = Simulation::new(&g, &params, &[0.99, 0.3]).unwrap();
        sim.step();
        sim.step();
        // 0.3 + 0.06 of drift, inhibited by at most 0.1
        assert!((sim.phase(1) - 0.26).abs() < 1e-12);
    }

    #[test]
    fn snapshot_restores() {
        let g = Graph::complete(4);
        let params = sf_params(0.55, 0.05);
        let mut a = Simulation::new(&g, &params, &[0.9, 0.7, 0.2, 0.1]).unwrap();
        a.step();
        let snap = a.snapshot();
        let mut b = Simulation::from_state(&g, &params, &snap).unwrap();
        for _ in 0..20 {
            assert_eq!(a.step(), b.step());
            assert_eq!(a.phases(), b.phases());
        }
    }

    #[test]
    fn event_log_format() {
        let log = [LogEntry {
            t: 0.1,
            kind: LogKind::Arrive,
            node: 2,
            src: Some(1),
        }];
        assert_eq!(event_log_csv(&log), "t,kind,node,src\n1.0000000000000001e-1,arrive,2,1\n");
    }
}
