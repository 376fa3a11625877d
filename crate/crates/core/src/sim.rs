//! Closed-loop simulation of `n` arms and `n` controllers over a fixed
//! graph or a switching schedule.
//!
//! Plant states and all controller-internal states form one augmented ODE
//! integrated with the classical fixed-step fourth-order Runge-Kutta
//! scheme. Dwell times are validated to be integer multiples of `dt`, so
//! switch instants land exactly on step boundaries; the active graph is
//! resolved per RK4 stage from an integer half-step index, which keeps the
//! lookup exact and the run bit-for-bit deterministic.

use crate::controllers::{self, AdaptiveState, ControllerError, ControllerGains, ControllerVariant, NeighborView};
use crate::dynamics::{forward_dynamics, ArmParameters, DisturbanceModel, PlantState};
use crate::graphs::{left_null_vector, DirectedGraphSpec, GraphError, SwitchingSchedule};
use crate::{Vec2, Vec5};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("simulation diverged at t = {t} s on agent {agent}: state left |x| <= {limit:e}")]
    Diverged { t: f64, agent: usize, limit: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// Interaction topology of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Fixed(DirectedGraphSpec),
    Switching(SwitchingSchedule),
}

impl Topology {
    pub fn n(&self) -> usize {
        match self {
            Topology::Fixed(g) => g.n(),
            Topology::Switching(s) => s.n(),
        }
    }
}

/// Initial plant and controller-internal states of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub q: Vec2,
    pub qdot: Vec2,
    pub adaptive: AdaptiveState,
}

/// A fully specified simulation: agents, topology, control law, gains,
/// disturbances, initial conditions, and integration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub variant: ControllerVariant,
    pub arms: Vec<ArmParameters>,
    pub topology: Topology,
    pub gains: Vec<ControllerGains>,
    pub disturbances: Vec<DisturbanceModel>,
    pub initial: Vec<InitialState>,
    pub t_end: f64,
    pub dt: f64,
    /// Trace rows are recorded every `sample_every` integration steps.
    pub sample_every: usize,
    /// Seed for randomized test utilities built on top of this scenario.
    pub seed: u64,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// Number of integration steps; `t_end` must be an integer multiple of
    /// `dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.n();
        if n == 0 {
            return invalid("graph", "at least one agent is required");
        }
        let lengths = [
            ("arms", self.arms.len()),
            ("gains", self.gains.len()),
            ("disturbances", self.disturbances.len()),
            ("initial", self.initial.len()),
        ];
        for (field, len) in lengths {
            if len != n {
                return invalid(field, &format!("expected {n} entries, got {len}"));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid("dt", "must be positive and finite");
        }
        if !self.t_end.is_finite() || self.t_end < self.dt {
            return invalid("t_end", "must be finite and at least dt");
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 || steps.round() < 1.0 {
            return invalid("t_end", "must be an integer multiple of dt");
        }
        if self.sample_every == 0 {
            return invalid("sample_every", "must be at least 1");
        }
        for (i, gains) in self.gains.iter().enumerate() {
            gains.validate().map_err(|e| gain_error(i, e))?;
        }
        for (i, init) in self.initial.iter().enumerate() {
            let finite = init.q.iter().chain(init.qdot.iter()).all(|v| v.is_finite())
                && init.adaptive.theta_hat.iter().all(|v| v.is_finite())
                && init.adaptive.integral_vartheta.iter().all(|v| v.is_finite())
                && init.adaptive.z.iter().all(|v| v.is_finite())
                && init.adaptive.zdot.iter().all(|v| v.is_finite())
                && init.adaptive.d_hat.is_finite()
                && init.adaptive.k_hat.is_finite()
                && init.adaptive.d_bar.is_finite();
            if !finite {
                return invalid(&format!("initial[{i}]"), "entries must be finite");
            }
            if init.adaptive.d_hat < 0.0 || init.adaptive.k_hat < 0.0 {
                return invalid(
                    &format!("initial[{i}]"),
                    "d_hat and k_hat must start nonnegative",
                );
            }
        }
        match &self.topology {
            Topology::Fixed(_) => {}
            Topology::Switching(schedule) => {
                if !self.variant.supports_switching() {
                    return invalid(
                        "controller",
                        &format!(
                            "variant `{}` requires a fixed graph, not a switching schedule",
                            self.variant
                        ),
                    );
                }
                if !schedule.cyclic() && schedule.period() + 1e-9 < self.t_end {
                    return invalid("schedule", "finite schedule does not cover t_end");
                }
                for (k, dwell) in schedule.dwell_times().iter().enumerate() {
                    let ratio = dwell / self.dt;
                    if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
                        return invalid(
                            &format!("schedule.segments[{k}].dwell"),
                            "must be an integer multiple of dt",
                        );
                    }
                }
            }
        }
        if self.variant == ControllerVariant::Baseline
            && self.disturbances.iter().any(|d| !d.is_zero())
        {
            return invalid(
                "disturbances",
                "the baseline law has no disturbance-rejection term; use it in disturbance-free scenarios",
            );
        }
        Ok(())
    }
}

fn invalid(field: &str, reason: &str) -> Result<(), SimError> {
    Err(SimError::Invalid { field: field.to_string(), reason: reason.to_string() })
}

fn gain_error(agent: usize, e: ControllerError) -> SimError {
    match e {
        ControllerError::InvalidGain { field, requirement } => SimError::Invalid {
            field: format!("gains[{agent}].{field}"),
            reason: format!("must be {requirement}"),
        },
        other => SimError::Controller(other),
    }
}

/// Time-indexed record of one agent over a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentTrace {
    pub q: Vec<Vec2>,
    pub qdot: Vec<Vec2>,
    pub tau: Vec<Vec2>,
    /// The controller's sliding/tracking variable.
    pub sliding: Vec<Vec2>,
    pub theta_hat: Vec<Vec5>,
    pub d_hat: Vec<f64>,
    pub k_hat: Vec<f64>,
}

/// Sampled closed-loop trajectories of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub agents: Vec<AgentTrace>,
    pub warnings: Vec<String>,
}

impl SimulationTrace {
    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    /// Maximum pairwise position disagreement at sample row `row`.
    pub fn disagreement_at(&self, row: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.agents.len() {
            for j in (i + 1)..self.agents.len() {
                worst = worst.max((self.agents[i].q[row] - self.agents[j].q[row]).norm());
            }
        }
        worst
    }

    pub fn max_velocity_at(&self, row: usize) -> f64 {
        self.agents.iter().map(|a| a.qdot[row].norm()).fold(0.0, f64::max)
    }
}

// Flat ODE state layout, one block of 18 entries per agent.
const PER_AGENT: usize = 18;
const OFF_Q: usize = 0;
const OFF_QD: usize = 2;
const OFF_TH: usize = 4;
const OFF_IV: usize = 9;
const OFF_Z: usize = 11;
const OFF_ZD: usize = 13;
const OFF_DH: usize = 15;
const OFF_KH: usize = 16;
const OFF_DB: usize = 17;

fn read_vec2(y: &[f64], base: usize) -> Vec2 {
    Vec2::new(y[base], y[base + 1])
}

fn write_vec2(y: &mut [f64], base: usize, v: &Vec2) {
    y[base] = v[0];
    y[base + 1] = v[1];
}

fn read_adaptive(y: &[f64], base: usize) -> AdaptiveState {
    AdaptiveState {
        theta_hat: Vec5::from_fn(|k, _| y[base + OFF_TH + k]),
        integral_vartheta: read_vec2(y, base + OFF_IV),
        z: read_vec2(y, base + OFF_Z),
        zdot: read_vec2(y, base + OFF_ZD),
        d_hat: y[base + OFF_DH],
        k_hat: y[base + OFF_KH],
        d_bar: y[base + OFF_DB],
    }
}

struct Segment {
    /// Per agent: in-neighbors with weights, `(j, a_ij)`.
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Segment {
    fn from_graph(g: &DirectedGraphSpec) -> Self {
        let neighbors = (0..g.n()).map(|i| g.in_neighbors(i).collect()).collect();
        Self { neighbors }
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    n: usize,
    segments: Vec<Segment>,
    /// Cumulative half-step boundaries; segment `k` is active on
    /// `[bounds[k], bounds[k+1])`.
    bounds: Vec<u64>,
    cyclic: bool,
    period_halfsteps: u64,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let n = scenario.n();
        match &scenario.topology {
            Topology::Fixed(g) => Self {
                scenario,
                n,
                segments: vec![Segment::from_graph(g)],
                bounds: vec![0, u64::MAX],
                cyclic: false,
                period_halfsteps: u64::MAX,
            },
            Topology::Switching(schedule) => {
                let segments = schedule.graphs().iter().map(Segment::from_graph).collect();
                let mut bounds = vec![0u64];
                for dwell in schedule.dwell_times() {
                    let steps = (dwell / scenario.dt).round() as u64;
                    bounds.push(bounds.last().unwrap() + 2 * steps);
                }
                let period = *bounds.last().unwrap();
                Self {
                    scenario,
                    n,
                    segments,
                    bounds,
                    cyclic: schedule.cyclic(),
                    period_halfsteps: period,
                }
            }
        }
    }

    fn segment_index(&self, halfstep: u64) -> usize {
        if self.segments.len() == 1 {
            return 0;
        }
        let h = if self.cyclic {
            halfstep % self.period_halfsteps
        } else {
            halfstep.min(self.period_halfsteps - 1)
        };
        match self.bounds.binary_search(&h) {
            Ok(k) => k,
            Err(k) => k - 1,
        }
    }

    /// Evaluates the augmented ODE right-hand side at stage time `t`
    /// (half-step index `halfstep`), optionally capturing torques and
    /// sliding variables for the trace.
    fn eval(
        &self,
        t: f64,
        halfstep: u64,
        y: &[f64],
        dy: &mut [f64],
        mut capture: Option<&mut Vec<(Vec2, Vec2)>>,
    ) -> Result<(), SimError> {
        let segment = &self.segments[self.segment_index(halfstep)];
        let uses_velocity = self.scenario.variant.uses_relative_velocity();
        for i in 0..self.n {
            let base = i * PER_AGENT;
            let plant = PlantState::new(read_vec2(y, base + OFF_Q), read_vec2(y, base + OFF_QD));
            if !plant.is_finite() {
                return Err(SimError::Diverged { t, agent: i, limit: DIVERGENCE_LIMIT });
            }
            let view = if uses_velocity {
                NeighborView::with_velocities(
                    segment.neighbors[i]
                        .iter()
                        .map(|&(j, w)| {
                            let jb = j * PER_AGENT;
                            (
                                w,
                                plant.q - read_vec2(y, jb + OFF_Q),
                                plant.qdot - read_vec2(y, jb + OFF_QD),
                            )
                        })
                        .collect(),
                )
            } else {
                NeighborView::positions_only(
                    segment.neighbors[i]
                        .iter()
                        .map(|&(j, w)| (w, plant.q - read_vec2(y, j * PER_AGENT + OFF_Q)))
                        .collect(),
                )
            };
            let adaptive = read_adaptive(y, base);
            let step = controllers::step(
                self.scenario.variant,
                &self.scenario.gains[i],
                self.scenario.arms[i].gravity,
                &plant,
                &view,
                &adaptive,
                t,
            )?;
            let disturbance = self.scenario.disturbances[i].torque(i + 1, t);
            let qddot = forward_dynamics(&self.scenario.arms[i], &plant, &step.tau, &disturbance)
                .map_err(|_| SimError::Diverged { t, agent: i, limit: DIVERGENCE_LIMIT })?;

            write_vec2(dy, base + OFF_Q, &plant.qdot);
            write_vec2(dy, base + OFF_QD, &qddot);
            for k in 0..5 {
                dy[base + OFF_TH + k] = step.derivatives.theta_hat[k];
            }
            write_vec2(dy, base + OFF_IV, &step.derivatives.integral_vartheta);
            write_vec2(dy, base + OFF_Z, &step.derivatives.z);
            write_vec2(dy, base + OFF_ZD, &step.derivatives.zdot);
            dy[base + OFF_DH] = step.derivatives.d_hat;
            dy[base + OFF_KH] = step.derivatives.k_hat;
            dy[base + OFF_DB] = step.derivatives.d_bar;

            if let Some(cap) = capture.as_deref_mut() {
                cap.push((step.tau, step.sliding));
            }
        }
        Ok(())
    }
}

/// Runs the closed loop and returns the sampled trace.
///
/// Fails on invalid scenarios and on divergence (any state component beyond
/// [`DIVERGENCE_LIMIT`]). A fixed graph without a directed spanning tree is
/// allowed but recorded as a warning, since consensus is then not
/// guaranteed.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace, SimError> {
    scenario.validate()?;
    let n = scenario.n();
    let mut warnings = Vec::new();
    match &scenario.topology {
        Topology::Fixed(g) => {
            if !g.contains_spanning_tree() {
                warnings.push(
                    "interaction graph does not contain a directed spanning tree; consensus is not guaranteed"
                        .to_string(),
                );
            }
        }
        Topology::Switching(schedule) => {
            if !schedule.union_graph().contains_spanning_tree() {
                warnings.push(
                    "union of schedule graphs does not contain a directed spanning tree; consensus is not guaranteed"
                        .to_string(),
                );
            }
        }
    }

    let engine = Engine::new(scenario);
    let dim = n * PER_AGENT;
    let mut y = vec![0.0; dim];
    for (i, init) in scenario.initial.iter().enumerate() {
        let base = i * PER_AGENT;
        write_vec2(&mut y, base + OFF_Q, &init.q);
        write_vec2(&mut y, base + OFF_QD, &init.qdot);
        for k in 0..5 {
            y[base + OFF_TH + k] = init.adaptive.theta_hat[k];
        }
        write_vec2(&mut y, base + OFF_IV, &init.adaptive.integral_vartheta);
        write_vec2(&mut y, base + OFF_Z, &init.adaptive.z);
        write_vec2(&mut y, base + OFF_ZD, &init.adaptive.zdot);
        y[base + OFF_DH] = init.adaptive.d_hat;
        y[base + OFF_KH] = init.adaptive.k_hat;
        y[base + OFF_DB] = init.adaptive.d_bar;
    }

    let steps = scenario.steps();
    let dt = scenario.dt;
    let mut trace = SimulationTrace {
        times: Vec::new(),
        agents: vec![AgentTrace::default(); n],
        warnings,
    };
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut capture: Vec<(Vec2, Vec2)> = Vec::with_capacity(n);

    for step_idx in 0..=steps {
        let t = step_idx as f64 * dt;
        if step_idx % scenario.sample_every == 0 {
            capture.clear();
            engine.eval(t, 2 * step_idx as u64, &y, &mut k1, Some(&mut capture))?;
            trace.times.push(t);
            for i in 0..n {
                let base = i * PER_AGENT;
                let agent = &mut trace.agents[i];
                agent.q.push(read_vec2(&y, base + OFF_Q));
                agent.qdot.push(read_vec2(&y, base + OFF_QD));
                agent.tau.push(capture[i].0);
                agent.sliding.push(capture[i].1);
                agent.theta_hat.push(Vec5::from_fn(|k, _| y[base + OFF_TH + k]));
                agent.d_hat.push(y[base + OFF_DH]);
                agent.k_hat.push(y[base + OFF_KH]);
            }
        }
        if step_idx == steps {
            break;
        }
        let hs = 2 * step_idx as u64;
        engine.eval(t, hs, &y, &mut k1, None)?;
        for d in 0..dim {
            stage[d] = y[d] + 0.5 * dt * k1[d];
        }
        engine.eval(t + 0.5 * dt, hs + 1, &stage, &mut k2, None)?;
        for d in 0..dim {
            stage[d] = y[d] + 0.5 * dt * k2[d];
        }
        engine.eval(t + 0.5 * dt, hs + 1, &stage, &mut k3, None)?;
        for d in 0..dim {
            stage[d] = y[d] + dt * k3[d];
        }
        engine.eval(t + dt, hs + 2, &stage, &mut k4, None)?;
        for d in 0..dim {
            y[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }

        let t_next = (step_idx + 1) as f64 * dt;
        for (d, value) in y.iter().enumerate() {
            if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT {
                return Err(SimError::Diverged {
                    t: t_next,
                    agent: d / PER_AGENT,
                    limit: DIVERGENCE_LIMIT,
                });
            }
        }
    }
    Ok(trace)
}

/// Weighted-average consensus equilibrium predicted from the graph, the
/// per-agent gains `alpha`, and the initial positions:
/// `sum_i (xi_i / alpha_i) q_i(0) / sum_i (xi_i / alpha_i)`.
///
/// Only root agents contribute because `xi` vanishes off the root
/// component.
pub fn predicted_equilibrium(
    graph: &DirectedGraphSpec,
    alpha: &[f64],
    q0: &[Vec2],
) -> Result<Vec2, GraphError> {
    let n = graph.n();
    if alpha.len() != n {
        return Err(GraphError::LengthMismatch { expected: n, got: alpha.len() });
    }
    if q0.len() != n {
        return Err(GraphError::LengthMismatch { expected: n, got: q0.len() });
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(GraphError::NonPositiveEntries { what: "alpha" });
    }
    let xi = left_null_vector(graph)?;
    let mut numerator = Vec2::zeros();
    let mut denominator = 0.0;
    for i in 0..n {
        let w = xi.as_slice()[i] / alpha[i];
        numerator += q0[i] * w;
        denominator += w;
    }
    Ok(numerator / denominator)
}

/// Summary metrics of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    /// `max_{i,j} |q_i - q_j|` at the final sample.
    pub final_disagreement: f64,
    /// `max_i |qd_i|` at the final sample.
    pub final_max_velocity: f64,
    /// First sampled time with disagreement below the threshold.
    pub time_to_threshold: Option<f64>,
    /// `max_i |q_i(t_end) - q_pred|` when a prediction applies.
    pub equilibrium_error: Option<f64>,
    pub final_d_hat: Vec<f64>,
    pub final_k_hat: Vec<f64>,
}

/// Computes consensus metrics over a nonempty trace. `predicted` is the
/// expected equilibrium for fixed-graph runs; switching runs pass `None`.
pub fn consensus_metrics(
    trace: &SimulationTrace,
    threshold: f64,
    predicted: Option<Vec2>,
) -> MetricsSummary {
    assert!(!trace.times.is_empty(), "consensus metrics need a nonempty trace");
    let last = trace.times.len() - 1;
    let time_to_threshold = (0..trace.times.len())
        .find(|row| trace.disagreement_at(*row) < threshold)
        .map(|row| trace.times[row]);
    let equilibrium_error = predicted.map(|target| {
        trace
            .agents
            .iter()
            .map(|a| (a.q[last] - target).norm())
            .fold(0.0, f64::max)
    });
    MetricsSummary {
        final_disagreement: trace.disagreement_at(last),
        final_max_velocity: trace.max_velocity_at(last),
        time_to_threshold,
        equilibrium_error,
        final_d_hat: trace.agents.iter().map(|a| *a.d_hat.last().unwrap()).collect(),
        final_k_hat: trace.agents.iter().map(|a| *a.k_hat.last().unwrap()).collect(),
    }
}

#[derive(Serialize)]
struct SummaryDoc {
    final_disagreement: f64,
    final_max_velocity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibrium_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_to_threshold: Option<f64>,
}

/// Renders the metrics summary as a small structured text document.
pub fn summary_document(metrics: &MetricsSummary) -> String {
    let doc = SummaryDoc {
        final_disagreement: metrics.final_disagreement,
        final_max_velocity: metrics.final_max_velocity,
        equilibrium_error: metrics.equilibrium_error,
        time_to_threshold: metrics.time_to_threshold,
    };
    toml::to_string(&doc).expect("summary serializes")
}

/// Writes the trace as CSV: `t`, then per agent `i` the columns
/// `q{i}_1, q{i}_2, qd{i}_1, qd{i}_2, tau{i}_1, tau{i}_2, dhat{i}, khat{i}`.
pub fn write_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from("t");
    for i in 1..=trace.n() {
        out.push_str(&format!(
            ",q{i}_1,q{i}_2,qd{i}_1,qd{i}_2,tau{i}_1,tau{i}_2,dhat{i},khat{i}"
        ));
    }
    out.push('\n');
    for row in 0..trace.rows() {
        out.push_str(&format!("{}", trace.times[row]));
        for agent in &trace.agents {
            out.push_str(&format!(
                ",{},{},{},{},{},{},{},{}",
                agent.q[row][0],
                agent.q[row][1],
                agent.qdot[row][0],
                agent.qdot[row][1],
                agent.tau[row][0],
                agent.tau[row][1],
                agent.d_hat[row],
                agent.k_hat[row]
            ));
        }
        out.push('\n');
    }
    out
}

/// One row of a step-size study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Max-norm difference of the terminal plant state against the finest-dt
    /// run.
    pub terminal_error: f64,
    /// Observed order against the next finer row, when defined.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub reference_dt: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Reruns the scenario for each step size and reports terminal-state errors
/// against the finest one. Runs execute in parallel; the comparison table
/// is ordered from coarsest to finest step.
pub fn convergence_study(scenario: &Scenario, dt_list: &[f64]) -> Result<ConvergenceStudy, SimError> {
    if dt_list.is_empty() {
        return Err(SimError::Invalid {
            field: "dt_list".to_string(),
            reason: "at least one step size is required".to_string(),
        });
    }
    let terminal_states: Vec<(f64, Vec<f64>)> = dt_list
        .par_iter()
        .map(|&dt| {
            let mut variant = scenario.clone();
            variant.dt = dt;
            variant.sample_every = variant.steps().max(1);
            let trace = run(&variant)?;
            let last = trace.rows() - 1;
            let mut terminal = Vec::with_capacity(4 * trace.n());
            for agent in &trace.agents {
                terminal.extend_from_slice(&[
                    agent.q[last][0],
                    agent.q[last][1],
                    agent.qdot[last][0],
                    agent.qdot[last][1],
                ]);
            }
            Ok((dt, terminal))
        })
        .collect::<Result<_, SimError>>()?;

    let reference_idx = terminal_states
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(idx, _)| idx)
        .unwrap();
    let (reference_dt, reference_state) = terminal_states[reference_idx].clone();

    let mut rows: Vec<ConvergenceRow> = terminal_states
        .iter()
        .enumerate()
        .filter(|(idx, _)| *idx != reference_idx)
        .map(|(_, (dt, state))| {
            let error = state
                .iter()
                .zip(&reference_state)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ConvergenceRow { dt: *dt, terminal_error: error, observed_order: None }
        })
        .collect();
    rows.sort_by(|a, b| b.dt.total_cmp(&a.dt));
    for k in 0..rows.len().saturating_sub(1) {
        let (coarse, fine) = (&rows[k], &rows[k + 1]);
        if coarse.terminal_error > 0.0 && fine.terminal_error > 0.0 && coarse.dt != fine.dt {
            let order = (coarse.terminal_error / fine.terminal_error).ln()
                / (coarse.dt / fine.dt).ln();
            rows[k].observed_order = Some(order);
        }
    }
    Ok(ConvergenceStudy { reference_dt, rows })
}

#[cfg(test)]
mod tests;
