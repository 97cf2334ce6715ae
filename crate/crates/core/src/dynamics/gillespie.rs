//! Event-driven simulation of the zero range process on a fixed environment.

use rand::Rng;
use serde::Serialize;

use super::fenwick::FenwickTree;
use super::{Configuration, SimClock};
use crate::environment::OrientedEdgeSet;
use crate::error::{Result, ZrpError};
use crate::measures::JumpRate;

/// Vertex count above which event selection uses the binary indexed tree.
pub const TREE_THRESHOLD: usize = 128;

/// Events between full recomputations of the rate sums.
pub const REBUILD_INTERVAL: u64 = 1_000_000;

/// A fired jump: one particle moved along `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Jump {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Jumped {
        waiting_time: f64,
        jump: Jump,
    },
    /// Total rate zero: no vertex can emit.
    Absorbed,
}

/// One Gillespie step computed from scratch in `O(vertices)`.
///
/// Every vertex has exactly two out-edges, each firing at rate `g(omega_x)`,
/// so the total rate is `2 * sum_x g(omega_x)`.
pub fn gillespie_step<R: Rng + ?Sized>(
    config: &mut Configuration,
    edges: &OrientedEdgeSet,
    g: &JumpRate,
    rng: &mut R,
) -> StepOutcome {
    let rates: Vec<f64> = config.occupancy().iter().map(|&k| g.eval(u64::from(k))).collect();
    let sum: f64 = rates.iter().sum();
    if sum <= 0.0 {
        return StepOutcome::Absorbed;
    }
    let waiting_time = exponential(rng, 2.0 * sum);
    let source = scan(&rates, rng.random::<f64>() * sum);
    let target = edges.out_neighbours(source)[usize::from(rng.random::<bool>())] as usize;
    config.move_particle(source, target);
    StepOutcome::Jumped {
        waiting_time,
        jump: Jump { source, target },
    }
}

#[inline]
fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

#[inline]
fn scan(rates: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    for (i, &r) in rates.iter().enumerate() {
        acc += r;
        if acc > x {
            return i;
        }
    }
    // rounding at the top end: last vertex with positive rate
    rates.iter().rposition(|&r| r > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone)]
enum Selector {
    Scan { rates: Vec<f64>, sum: f64 },
    Tree(FenwickTree),
}

impl Selector {
    fn new(rates: Vec<f64>) -> Self {
        if rates.len() > TREE_THRESHOLD {
            Selector::Tree(FenwickTree::from_values(&rates))
        } else {
            let sum = rates.iter().sum();
            Selector::Scan { rates, sum }
        }
    }

    #[inline]
    fn sum(&self) -> f64 {
        match self {
            Selector::Scan { sum, .. } => *sum,
            Selector::Tree(t) => t.total(),
        }
    }

    #[inline]
    fn rate(&self, v: usize) -> f64 {
        match self {
            Selector::Scan { rates, .. } => rates[v],
            Selector::Tree(t) => t.value(v),
        }
    }

    #[inline]
    fn set(&mut self, v: usize, r: f64) {
        match self {
            Selector::Scan { rates, sum } => {
                *sum += r - rates[v];
                rates[v] = r;
            }
            Selector::Tree(t) => t.set(v, r),
        }
    }

    #[inline]
    fn pick(&self, x: f64) -> usize {
        match self {
            Selector::Scan { rates, .. } => scan(rates, x),
            Selector::Tree(t) => t.search(x),
        }
    }

    fn rebuild(&mut self) {
        match self {
            Selector::Scan { rates, sum } => *sum = rates.iter().sum(),
            Selector::Tree(t) => t.rebuild(),
        }
    }
}

/// Incremental simulator: per-vertex rates with a running sum (or a binary
/// indexed tree for large graphs), rebuilt every [`REBUILD_INTERVAL`] events.
#[derive(Debug, Clone)]
pub struct Simulator {
    out: Vec<[u32; 2]>,
    g: JumpRate,
    config: Configuration,
    selector: Selector,
    clock: SimClock,
    initial_total: u64,
}

/// Result of [`Simulator::run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub micro_time: f64,
    pub macro_time: f64,
    pub events: u64,
    pub absorbed: bool,
    pub conserved: bool,
}

impl Simulator {
    pub fn new(config: Configuration, edges: &OrientedEdgeSet, g: &JumpRate) -> Result<Self> {
        if config.occupancy().len() != edges.vertex_count() {
            return Err(ZrpError::Input(format!(
                "configuration has {} vertices, graph has {}",
                config.occupancy().len(),
                edges.vertex_count()
            )));
        }
        let rates = config.occupancy().iter().map(|&k| g.eval(u64::from(k))).collect();
        Ok(Simulator {
            out: edges.out_adjacency().to_vec(),
            g: g.clone(),
            clock: SimClock::new(config.sites()),
            initial_total: config.total(),
            config,
            selector: Selector::new(rates),
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    /// Current total jump rate `2 * sum_x g(omega_x)`.
    pub fn total_rate(&self) -> f64 {
        2.0 * self.selector.sum()
    }

    fn apply(&mut self, source: usize, target: usize) {
        self.config.move_particle(source, target);
        let gs = self.g.eval(u64::from(self.config.get(source)));
        let gt = self.g.eval(u64::from(self.config.get(target)));
        self.selector.set(source, gs);
        self.selector.set(target, gt);
        self.clock.event_count += 1;
        if self.clock.event_count % REBUILD_INTERVAL == 0 {
            self.selector.rebuild();
            assert!(self.config.is_consistent(), "particle count drifted");
            assert_eq!(self.config.total(), self.initial_total, "particles not conserved");
        }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, usize, usize)> {
        let sum = self.selector.sum();
        if sum <= 0.0 {
            return None;
        }
        let dt = exponential(rng, 2.0 * sum);
        let mut source = self.selector.pick(rng.random::<f64>() * sum);
        if self.selector.rate(source) <= 0.0 {
            // a rounding boundary landed on an empty vertex
            let rates: Vec<f64> = (0..self.out.len()).map(|v| self.selector.rate(v)).collect();
            source = scan(&rates, rng.random::<f64>() * rates.iter().sum::<f64>());
        }
        let target = self.out[source][usize::from(rng.random::<bool>())] as usize;
        Some((dt, source, target))
    }

    /// Advances one event.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        match self.draw(rng) {
            None => StepOutcome::Absorbed,
            Some((dt, source, target)) => {
                self.clock.micro_time += dt;
                self.apply(source, target);
                StepOutcome::Jumped {
                    waiting_time: dt,
                    jump: Jump { source, target },
                }
            }
        }
    }

    /// Runs to macroscopic time `t_macro` (microscopic `t_macro * N^2`),
    /// calling `observe(i, t_i, config)` exactly once for each requested
    /// snapshot time, in order. Snapshot times must be sorted and lie in
    /// `[current time, t_macro]`.
    pub fn run<R, F>(&mut self, t_macro: f64, snapshots: &[f64], rng: &mut R, mut observe: F) -> Result<RunSummary>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, f64, &Configuration),
    {
        if !(t_macro >= 0.0) || !t_macro.is_finite() {
            return Err(ZrpError::InvalidParameter(format!(
                "horizon must be finite and >= 0, got {t_macro}"
            )));
        }
        let now = self.clock.macro_time();
        if snapshots.windows(2).any(|w| w[0] > w[1]) || snapshots.iter().any(|&s| s < now - 1e-15 || s > t_macro) {
            return Err(ZrpError::Input(format!(
                "snapshot times must be sorted within [{now}, {t_macro}]"
            )));
        }
        let horizon = self.clock.micro_of(t_macro);
        let marks: Vec<f64> = snapshots.iter().map(|&s| self.clock.micro_of(s)).collect();
        Ok(self.drive(horizon, &marks, rng, |i, c| observe(i, snapshots[i], c)))
    }

    /// Runs until microscopic (generator) time `horizon`, with no snapshots.
    pub fn run_micro<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Result<RunSummary> {
        if !(horizon >= self.clock.micro_time) || !horizon.is_finite() {
            return Err(ZrpError::InvalidParameter(format!(
                "horizon {horizon} is before the current time {}",
                self.clock.micro_time
            )));
        }
        Ok(self.drive(horizon, &[], rng, |_, _| {}))
    }

    fn drive<R, F>(&mut self, horizon: f64, marks: &[f64], rng: &mut R, mut observe: F) -> RunSummary
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &Configuration),
    {
        let mut next = 0;
        let mut absorbed = false;
        loop {
            let Some((dt, source, target)) = self.draw(rng) else {
                absorbed = self.clock.micro_time < horizon;
                break;
            };
            let when = self.clock.micro_time + dt;
            while next < marks.len() && marks[next] < when {
                observe(next, &self.config);
                next += 1;
            }
            if when > horizon {
                break;
            }
            self.clock.micro_time = when;
            self.apply(source, target);
        }
        // after absorption the state is frozen, so it is the state at every later time
        while next < marks.len() {
            observe(next, &self.config);
            next += 1;
        }
        self.clock.micro_time = horizon.max(self.clock.micro_time);
        RunSummary {
            micro_time: self.clock.micro_time,
            macro_time: self.clock.macro_time(),
            events: self.clock.event_count,
            absorbed,
            conserved: self.config.is_consistent() && self.config.total() == self.initial_total,
        }
    }
}

/// Runs a fresh simulation and returns the final configuration.
pub fn simulate<R, F>(
    config: Configuration,
    edges: &OrientedEdgeSet,
    g: &JumpRate,
    t_macro: f64,
    snapshots: &[f64],
    rng: &mut R,
    observe: F,
) -> Result<(Configuration, RunSummary)>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &Configuration),
{
    let mut sim = Simulator::new(config, edges, g)?;
    let summary = sim.run(t_macro, snapshots, rng, observe)?;
    Ok((sim.into_config(), summary))
}
