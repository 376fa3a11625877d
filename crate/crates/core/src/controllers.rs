//! The five distributed control laws with their adaptation dynamics.
//!
//! Every step function is pure: `(gains, plant, neighbor view, adaptive
//! state, time) -> (torque, adaptive-state derivatives)`. A controller sees
//! only its own plant state and the relative information flowing along the
//! in-edges of the current graph; the velocity-free variants take a view
//! that must not carry relative velocities at all.
//!
//! Common building blocks:
//!
//! * sliding-type variable `s` combining own velocity, weighted relative
//!   positions and (for the integral-augmented laws) the integral of the
//!   auxiliary variable;
//! * adaptive feedforward `Y(q, qd, x, y) theta_hat` compensating the
//!   uncertain lumped parameters;
//! * continuous disturbance-rejection term `-(d_hat / (|s| + mu(t))) s`
//!   whose gain `d_hat` adapts online and never exceeds the term's norm.

use crate::dynamics::regressor;
use crate::{Mat2, Mat5, PlantState, Vec2, Vec5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("controller variant `{0}` is unknown")]
    UnknownVariant(String),
    #[error("this controller requires relative velocity measurements")]
    MissingRelativeVelocity,
    #[error("velocity-free controller received relative velocity measurements")]
    RelativeVelocityNotAllowed,
    #[error("gain `{field}` must be {requirement}")]
    InvalidGain { field: &'static str, requirement: &'static str },
}

/// Names of the control laws as they appear in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerVariant {
    Baseline,
    Fixed,
    FixedNovel,
    Switching,
    SwitchingNovel,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 5] = [
        ControllerVariant::Baseline,
        ControllerVariant::Fixed,
        ControllerVariant::FixedNovel,
        ControllerVariant::Switching,
        ControllerVariant::SwitchingNovel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerVariant::Baseline => "baseline",
            ControllerVariant::Fixed => "fixed",
            ControllerVariant::FixedNovel => "fixed-novel",
            ControllerVariant::Switching => "switching",
            ControllerVariant::SwitchingNovel => "switching-novel",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ControllerError> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| ControllerError::UnknownVariant(name.to_string()))
    }

    /// Whether the law consumes neighbors' velocity measurements.
    pub fn uses_relative_velocity(self) -> bool {
        matches!(
            self,
            ControllerVariant::Baseline | ControllerVariant::Fixed | ControllerVariant::Switching
        )
    }

    /// Whether the law is designed for time-varying graphs.
    pub fn supports_switching(self) -> bool {
        matches!(self, ControllerVariant::Switching | ControllerVariant::SwitchingNovel)
    }
}

impl std::fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerVariant {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Decay function `mu(t)` in the disturbance-rejection denominator.
/// Both forms are positive for all `t >= 0` and integrable on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuFunction {
    /// `exp(-t)`.
    ExpNegT,
    /// `1 / (t + 1)^2`.
    InvSquare,
}

impl MuFunction {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            MuFunction::ExpNegT => (-t).exp(),
            MuFunction::InvSquare => 1.0 / ((t + 1.0) * (t + 1.0)),
        }
    }
}

/// Optional sigma-modification of the disturbance-gain adaptation.
/// `gamma = 0` freezes the moving baseline `d_bar`, recovering the plain
/// sigma-modification; `sigma = 0` recovers the unmodified update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaModification {
    pub sigma: f64,
    #[serde(default)]
    pub gamma: f64,
}

/// Per-agent control gains. Agents may use different gains; no common gain
/// is required across the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    /// Relative-position gain `alpha` in the auxiliary variables.
    pub alpha: f64,
    /// Feedback gain `K` (unused by `fixed-novel`, which adapts `k_hat`).
    pub feedback: Mat2,
    /// Adaptation gain `Lambda` for the parameter estimate.
    pub adaptation: Mat5,
    /// Disturbance-gain adaptation rate `delta`.
    pub delta: f64,
    /// Feedback-gain adaptation rate `gamma` (`fixed-novel` only).
    pub gamma: f64,
    /// Reference-model constant `k` (`switching-novel` only).
    pub reference_k: f64,
    /// Decay function in the disturbance-rejection term.
    pub mu: MuFunction,
    /// Optional sigma-modification of the `d_hat` update.
    pub sigma_mod: Option<SigmaModification>,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            feedback: Mat2::identity() * 2.0,
            adaptation: Mat5::identity() * 5.0,
            delta: 0.2,
            gamma: 3.0,
            reference_k: 1.0,
            mu: MuFunction::ExpNegT,
            sigma_mod: None,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let positive = [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("k", self.reference_k),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ControllerError::InvalidGain {
                    field,
                    requirement: "positive and finite",
                });
            }
        }
        if !symmetric_positive_definite(&self.feedback) {
            return Err(ControllerError::InvalidGain {
                field: "k_gain",
                requirement: "symmetric positive definite",
            });
        }
        if !symmetric_positive_definite_5(&self.adaptation) {
            return Err(ControllerError::InvalidGain {
                field: "lambda",
                requirement: "symmetric positive definite",
            });
        }
        if let Some(sm) = &self.sigma_mod {
            if !(sm.sigma > 0.0) || !sm.sigma.is_finite() {
                return Err(ControllerError::InvalidGain {
                    field: "sigma_mod.sigma",
                    requirement: "positive and finite",
                });
            }
            if sm.gamma < 0.0 || !sm.gamma.is_finite() {
                return Err(ControllerError::InvalidGain {
                    field: "sigma_mod.gamma",
                    requirement: "nonnegative and finite",
                });
            }
        }
        Ok(())
    }
}

fn symmetric_positive_definite(m: &Mat2) -> bool {
    if (m - m.transpose()).amax() > 1e-12 {
        return false;
    }
    ((m + m.transpose()) * 0.5).symmetric_eigen().eigenvalues.iter().all(|l| *l > 0.0)
}

fn symmetric_positive_definite_5(m: &Mat5) -> bool {
    if (m - m.transpose()).amax() > 1e-12 {
        return false;
    }
    ((m + m.transpose()) * 0.5).symmetric_eigen().eigenvalues.iter().all(|l| *l > 0.0)
}

/// Controller-internal adaptive and auxiliary states of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveState {
    /// Lumped-parameter estimate.
    pub theta_hat: Vec5,
    /// Disturbance-bound estimate, nondecreasing under the plain update.
    pub d_hat: f64,
    /// Adaptive feedback gain (`fixed-novel`).
    pub k_hat: f64,
    /// Integral of the auxiliary variable (fixed-graph laws).
    pub integral_vartheta: Vec2,
    /// Reference-model state (switching laws).
    pub z: Vec2,
    /// Reference-model velocity (`switching-novel`).
    pub zdot: Vec2,
    /// Moving baseline of the sigma-modification, frozen at zero otherwise.
    pub d_bar: f64,
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self {
            theta_hat: Vec5::zeros(),
            d_hat: 0.0,
            k_hat: 0.0,
            integral_vartheta: Vec2::zeros(),
            z: Vec2::zeros(),
            zdot: Vec2::zeros(),
            d_bar: 0.0,
        }
    }
}

/// Time derivatives of [`AdaptiveState`]; entries a law does not use stay
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdaptiveDerivatives {
    pub theta_hat: Vec5,
    pub d_hat: f64,
    pub k_hat: f64,
    pub integral_vartheta: Vec2,
    pub z: Vec2,
    pub zdot: Vec2,
    pub d_bar: f64,
}

/// Relative information available to one agent at one instant: one entry per
/// in-neighbor. Views for velocity-free controllers must be built with
/// [`NeighborView::positions_only`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborView {
    weights: Vec<f64>,
    rel_pos: Vec<Vec2>,
    rel_vel: Option<Vec<Vec2>>,
}

impl NeighborView {
    /// View carrying `(a_ij, q_i - q_j, qd_i - qd_j)` per neighbor.
    pub fn with_velocities(entries: Vec<(f64, Vec2, Vec2)>) -> Self {
        let mut weights = Vec::with_capacity(entries.len());
        let mut rel_pos = Vec::with_capacity(entries.len());
        let mut rel_vel = Vec::with_capacity(entries.len());
        for (w, dp, dv) in entries {
            weights.push(w);
            rel_pos.push(dp);
            rel_vel.push(dv);
        }
        Self { weights, rel_pos, rel_vel: Some(rel_vel) }
    }

    /// View carrying only `(a_ij, q_i - q_j)` per neighbor.
    pub fn positions_only(entries: Vec<(f64, Vec2)>) -> Self {
        let mut weights = Vec::with_capacity(entries.len());
        let mut rel_pos = Vec::with_capacity(entries.len());
        for (w, dp) in entries {
            weights.push(w);
            rel_pos.push(dp);
        }
        Self { weights, rel_pos, rel_vel: None }
    }

    pub fn has_velocities(&self) -> bool {
        self.rel_vel.is_some()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `sum_j a_ij (q_i - q_j)`.
    pub fn weighted_rel_pos(&self) -> Vec2 {
        self.weights
            .iter()
            .zip(&self.rel_pos)
            .fold(Vec2::zeros(), |acc, (w, dp)| acc + *dp * *w)
    }

    /// `sum_j a_ij (qd_i - qd_j)`; errors when the view has no velocities.
    pub fn weighted_rel_vel(&self) -> Result<Vec2, ControllerError> {
        let rel_vel = self.rel_vel.as_ref().ok_or(ControllerError::MissingRelativeVelocity)?;
        Ok(self
            .weights
            .iter()
            .zip(rel_vel)
            .fold(Vec2::zeros(), |acc, (w, dv)| acc + *dv * *w))
    }

    /// Weighted in-degree `sum_j a_ij`.
    pub fn degree(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Output of one controller evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    /// Joint torque command.
    pub tau: Vec2,
    /// The law's sliding/tracking variable (`s`, `e`, or `w`), for traces.
    pub sliding: Vec2,
    pub derivatives: AdaptiveDerivatives,
}

/// The continuous disturbance-rejection term `-(d_hat / (|v| + mu)) v`.
/// Exactly zero at `v = 0` and never larger than `d_hat` in norm.
fn robust_term(v: &Vec2, d_hat: f64, mu: f64) -> Vec2 {
    -v * (d_hat / (v.norm() + mu))
}

/// Sigma-modified disturbance-gain update:
/// `d_hat' = delta (|s|^2/(|s|+mu) - sigma (d_hat - d_bar))`,
/// `d_bar' = gamma_bar (d_hat - d_bar)`.
pub fn sigma_mod_d_update(
    delta: f64,
    sigma: f64,
    gamma_bar: f64,
    s_norm: f64,
    mu: f64,
    d_hat: f64,
    d_bar: f64,
) -> (f64, f64) {
    let drive = s_norm * s_norm / (s_norm + mu);
    (delta * (drive - sigma * (d_hat - d_bar)), gamma_bar * (d_hat - d_bar))
}

/// Disturbance-gain rate for the configured adaptation variant.
fn d_hat_rate(gains: &ControllerGains, s_norm: f64, mu: f64, d_hat: f64, d_bar: f64) -> (f64, f64) {
    match &gains.sigma_mod {
        None => (gains.delta * s_norm * s_norm / (s_norm + mu), 0.0),
        Some(sm) => sigma_mod_d_update(gains.delta, sm.sigma, sm.gamma, s_norm, mu, d_hat, d_bar),
    }
}

/// Sliding-variable consensus law for a fixed graph without disturbance
/// rejection: `s = qd + alpha sum a_ij (q_i - q_j)`, torque
/// `-K s + Y(q, qd, qdd_r, qd_r) theta_hat`.
pub fn ctrl_baseline_step(
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
) -> Result<ControlStep, ControllerError> {
    let p = view.weighted_rel_pos();
    let v = view.weighted_rel_vel()?;
    let qdot_r = -p * gains.alpha;
    let qddot_r = -v * gains.alpha;
    let s = plant.qdot - qdot_r;
    let y = regressor(gravity_accel, &plant.q, &plant.qdot, &qddot_r, &qdot_r);
    let tau = -gains.feedback * s + y * adaptive.theta_hat;
    let derivatives = AdaptiveDerivatives {
        theta_hat: -gains.adaptation * (y.transpose() * s),
        ..Default::default()
    };
    Ok(ControlStep { tau, sliding: s, derivatives })
}

/// Integral-augmented law for a fixed graph with adaptive disturbance
/// rejection. The integral term in the auxiliary variable pins the
/// consensus equilibrium to the weighted average of initial positions.
pub fn ctrl_fixed_step(
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
    t: f64,
) -> Result<ControlStep, ControllerError> {
    let mu = gains.mu.eval(t);
    let p = view.weighted_rel_pos();
    let v = view.weighted_rel_vel()?;
    let vartheta = plant.qdot + p * gains.alpha;
    let integral = adaptive.integral_vartheta;
    let qdot_r = -p * gains.alpha - integral;
    let s = vartheta + integral;
    let qddot_r = -v * gains.alpha - vartheta;
    let y = regressor(gravity_accel, &plant.q, &plant.qdot, &qddot_r, &qdot_r);
    let tau =
        -gains.feedback * s + y * adaptive.theta_hat + robust_term(&s, adaptive.d_hat, mu);
    let (d_hat_dot, d_bar_dot) = d_hat_rate(gains, s.norm(), mu, adaptive.d_hat, adaptive.d_bar);
    let derivatives = AdaptiveDerivatives {
        theta_hat: -gains.adaptation * (y.transpose() * s),
        d_hat: d_hat_dot,
        d_bar: d_bar_dot,
        integral_vartheta: vartheta,
        ..Default::default()
    };
    Ok(ControlStep { tau, sliding: s, derivatives })
}

/// Fixed-graph law without neighbor velocity measurements: the constant
/// feedback gain is replaced by the adaptive `k_hat` and the feedforward
/// uses `Y(q, qd, 0, qd_r) theta_hat = C qd_r + g` only.
pub fn ctrl_fixed_novel_step(
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
    t: f64,
) -> Result<ControlStep, ControllerError> {
    if view.has_velocities() {
        return Err(ControllerError::RelativeVelocityNotAllowed);
    }
    let mu = gains.mu.eval(t);
    let p = view.weighted_rel_pos();
    let vartheta = plant.qdot + p * gains.alpha;
    let integral = adaptive.integral_vartheta;
    let qdot_r = -p * gains.alpha - integral;
    let s = vartheta + integral;
    let y = regressor(gravity_accel, &plant.q, &plant.qdot, &Vec2::zeros(), &qdot_r);
    let tau = -s * adaptive.k_hat + y * adaptive.theta_hat + robust_term(&s, adaptive.d_hat, mu);
    let (d_hat_dot, d_bar_dot) = d_hat_rate(gains, s.norm(), mu, adaptive.d_hat, adaptive.d_bar);
    let derivatives = AdaptiveDerivatives {
        theta_hat: -gains.adaptation * (y.transpose() * s),
        d_hat: d_hat_dot,
        d_bar: d_bar_dot,
        k_hat: gains.gamma * s.norm_squared(),
        integral_vartheta: vartheta,
        ..Default::default()
    };
    Ok(ControlStep { tau, sliding: s, derivatives })
}

/// Model-reference law for switching graphs with relative velocities. The
/// reference state `z` tracks the consensus of `w = qd + q`; no derivative
/// of the time-varying weights is ever needed.
pub fn ctrl_switching_step(
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
    t: f64,
) -> Result<ControlStep, ControllerError> {
    let mu = gains.mu.eval(t);
    let p = view.weighted_rel_pos();
    let v = view.weighted_rel_vel()?;
    let zdot = -(p + v) * gains.alpha;
    let w = plant.qdot + plant.q;
    let e = w - adaptive.z;
    let y = regressor(
        gravity_accel,
        &plant.q,
        &plant.qdot,
        &(plant.qdot - zdot),
        &(plant.q - adaptive.z),
    );
    let tau =
        -gains.feedback * e + y * adaptive.theta_hat + robust_term(&e, adaptive.d_hat, mu);
    let (d_hat_dot, d_bar_dot) = d_hat_rate(gains, e.norm(), mu, adaptive.d_hat, adaptive.d_bar);
    let derivatives = AdaptiveDerivatives {
        theta_hat: -gains.adaptation * (y.transpose() * e),
        d_hat: d_hat_dot,
        d_bar: d_bar_dot,
        z: zdot,
        ..Default::default()
    };
    Ok(ControlStep { tau, sliding: e, derivatives })
}

/// Model-reference law for switching graphs without neighbor velocities.
/// The second-order reference model is driven by relative positions and the
/// agent's own velocity only.
pub fn ctrl_switching_novel_step(
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
    t: f64,
) -> Result<ControlStep, ControllerError> {
    if view.has_velocities() {
        return Err(ControllerError::RelativeVelocityNotAllowed);
    }
    let mu = gains.mu.eval(t);
    let p = view.weighted_rel_pos();
    let degree = view.degree();
    let k = gains.reference_k;
    let zddot = -p - plant.qdot * (degree / k + k);
    let e = plant.q - adaptive.z;
    let edot = plant.qdot - adaptive.zdot;
    let w = edot + e;
    let y = regressor(
        gravity_accel,
        &plant.q,
        &plant.qdot,
        &(zddot - edot),
        &(adaptive.zdot - e),
    );
    let tau =
        -gains.feedback * w + y * adaptive.theta_hat + robust_term(&w, adaptive.d_hat, mu);
    let (d_hat_dot, d_bar_dot) = d_hat_rate(gains, w.norm(), mu, adaptive.d_hat, adaptive.d_bar);
    let derivatives = AdaptiveDerivatives {
        theta_hat: -gains.adaptation * (y.transpose() * w),
        d_hat: d_hat_dot,
        d_bar: d_bar_dot,
        z: adaptive.zdot,
        zdot: zddot,
        ..Default::default()
    };
    Ok(ControlStep { tau, sliding: w, derivatives })
}

/// Dispatches to the step function of `variant`.
pub fn step(
    variant: ControllerVariant,
    gains: &ControllerGains,
    gravity_accel: f64,
    plant: &PlantState,
    view: &NeighborView,
    adaptive: &AdaptiveState,
    t: f64,
) -> Result<ControlStep, ControllerError> {
    match variant {
        ControllerVariant::Baseline => {
            ctrl_baseline_step(gains, gravity_accel, plant, view, adaptive)
        }
        ControllerVariant::Fixed => {
            ctrl_fixed_step(gains, gravity_accel, plant, view, adaptive, t)
        }
        ControllerVariant::FixedNovel => {
            ctrl_fixed_novel_step(gains, gravity_accel, plant, view, adaptive, t)
        }
        ControllerVariant::Switching => {
            ctrl_switching_step(gains, gravity_accel, plant, view, adaptive, t)
        }
        ControllerVariant::SwitchingNovel => {
            ctrl_switching_novel_step(gains, gravity_accel, plant, view, adaptive, t)
        }
    }
}

#[cfg(test)]
mod tests;
