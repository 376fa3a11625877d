//! Euler-Lagrange plant of a planar two-link revolute arm.
//!
//! The model is the standard one: `M(q) qdd + C(q, qd) qd + g(q) + d(t) = tau`
//! with the Christoffel-symbol Coriolis matrix and joint angles measured from
//! the horizontal (gravity torques in cosine form). The dynamics are linear
//! in the five lumped parameters
//!
//! ```text
//! theta = (m1 lc1^2 + m2 l1^2 + J1,  m2 lc2^2 + J2,  m2 l1 lc2,
//!          m1 lc1 + m2 l1,  m2 lc2)
//! ```
//!
//! so that `M(q) x + C(q, qd) y + g(q) = Y(q, qd, x, y) theta` for all `x`,
//! `y`. The regressor `Y` depends on the gravitational acceleration but not
//! on the uncertain constants, which is what lets the controllers adapt.

use crate::{Mat2, Regressor, Vec2, Vec5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("arm parameter `{field}` must be {requirement}, got {value}")]
    InvalidParameter { field: &'static str, requirement: &'static str, value: f64 },
    #[error("non-finite input to forward dynamics")]
    NonFiniteInput,
}

/// Physical constants of one arm plus the derived lumped parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmParameters {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub j1: f64,
    pub j2: f64,
    pub gravity: f64,
    theta: Vec5,
}

impl ArmParameters {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m1: f64,
        m2: f64,
        l1: f64,
        l2: f64,
        lc1: f64,
        lc2: f64,
        j1: f64,
        j2: f64,
        gravity: f64,
    ) -> Result<Self, DynamicsError> {
        let positive = [
            ("m1", m1),
            ("m2", m2),
            ("l1", l1),
            ("l2", l2),
            ("lc1", lc1),
            ("lc2", lc2),
            ("j1", j1),
            ("j2", j2),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DynamicsError::InvalidParameter {
                    field,
                    requirement: "positive and finite",
                    value,
                });
            }
        }
        if !gravity.is_finite() || gravity < 0.0 {
            return Err(DynamicsError::InvalidParameter {
                field: "gravity",
                requirement: "nonnegative and finite",
                value: gravity,
            });
        }
        if lc1 > l1 {
            return Err(DynamicsError::InvalidParameter {
                field: "lc1",
                requirement: "at most l1",
                value: lc1,
            });
        }
        if lc2 > l2 {
            return Err(DynamicsError::InvalidParameter {
                field: "lc2",
                requirement: "at most l2",
                value: lc2,
            });
        }
        let theta = Self::lumped_parameters(m1, m2, l1, lc1, lc2, j1, j2);
        Ok(Self { m1, m2, l1, l2, lc1, lc2, j1, j2, gravity, theta })
    }

    /// The deterministic lumping of the physical constants.
    pub fn lumped_parameters(
        m1: f64,
        m2: f64,
        l1: f64,
        lc1: f64,
        lc2: f64,
        j1: f64,
        j2: f64,
    ) -> Vec5 {
        Vec5::new(
            m1 * lc1 * lc1 + m2 * l1 * l1 + j1,
            m2 * lc2 * lc2 + j2,
            m2 * l1 * lc2,
            m1 * lc1 + m2 * l1,
            m2 * lc2,
        )
    }

    pub fn theta(&self) -> &Vec5 {
        &self.theta
    }
}

/// Plant state of one agent: joint angles and velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub q: Vec2,
    pub qdot: Vec2,
}

impl PlantState {
    pub fn new(q: Vec2, qdot: Vec2) -> Self {
        Self { q, qdot }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

/// Symmetric positive definite inertia matrix `M(q)`.
pub fn mass_matrix(p: &ArmParameters, q: &Vec2) -> Mat2 {
    let c2 = q[1].cos();
    let th = p.theta();
    let m11 = th[0] + th[1] + 2.0 * th[2] * c2;
    let m12 = th[1] + th[2] * c2;
    let m22 = th[1];
    Mat2::new(m11, m12, m12, m22)
}

/// Coriolis/centrifugal matrix from the Christoffel symbols; satisfies the
/// skew symmetry of `Mdot - 2C` and `|C(q, y)| <= k_C |y|`.
pub fn coriolis_matrix(p: &ArmParameters, q: &Vec2, qdot: &Vec2) -> Mat2 {
    let h = p.theta()[2] * q[1].sin();
    Mat2::new(
        -h * qdot[1],
        -h * (qdot[0] + qdot[1]),
        h * qdot[0],
        0.0,
    )
}

/// Gravity torque vector with angles measured from the horizontal.
pub fn gravity_vector(p: &ArmParameters, q: &Vec2) -> Vec2 {
    let th = p.theta();
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    Vec2::new(
        p.gravity * (th[3] * c1 + th[4] * c12),
        p.gravity * th[4] * c12,
    )
}

/// Regressor of the linear parameterization:
/// `Y(q, qd, x, y) theta = M(q) x + C(q, qd) y + g(q)`.
///
/// `x` multiplies the inertia terms and `y` the Coriolis terms. Only the
/// gravitational acceleration enters; the uncertain constants do not.
pub fn regressor(gravity_accel: f64, q: &Vec2, qdot: &Vec2, x: &Vec2, y: &Vec2) -> Regressor {
    let c2 = q[1].cos();
    let s2 = q[1].sin();
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    Regressor::new(
        x[0],
        x[0] + x[1],
        c2 * (2.0 * x[0] + x[1]) + s2 * (-qdot[1] * y[0] - (qdot[0] + qdot[1]) * y[1]),
        gravity_accel * c1,
        gravity_accel * c12,
        0.0,
        x[0] + x[1],
        c2 * x[0] + s2 * qdot[0] * y[0],
        0.0,
        gravity_accel * c12,
    )
}

/// Joint accelerations `qdd = M(q)^{-1} (tau - C(q, qd) qd - g(q) - d)`.
pub fn forward_dynamics(
    p: &ArmParameters,
    state: &PlantState,
    tau: &Vec2,
    disturbance: &Vec2,
) -> Result<Vec2, DynamicsError> {
    if !state.is_finite()
        || !tau.iter().all(|v| v.is_finite())
        || !disturbance.iter().all(|v| v.is_finite())
    {
        return Err(DynamicsError::NonFiniteInput);
    }
    let m = mass_matrix(p, &state.q);
    let rhs = tau
        - coriolis_matrix(p, &state.q, &state.qdot) * state.qdot
        - gravity_vector(p, &state.q)
        - disturbance;
    // Direct 2x2 solve; M is positive definite for valid parameters.
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Ok(Vec2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    ))
}

/// Bounded additive joint torque disturbance.
///
/// The base waveform is `amplitude * sin(frequency_scale * i * t)` on both
/// joints, where `i` is the one-based agent index; an optional extra bounded
/// waveform can be added. Controllers never see the disturbance or its
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceModel {
    pub amplitude: f64,
    pub frequency_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Waveform>,
}

/// Optional additional bounded waveform for a disturbance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum Waveform {
    Constant { value: [f64; 2] },
    Sine { amplitude: [f64; 2], frequency: f64, phase: f64 },
}

impl DisturbanceModel {
    pub fn zero() -> Self {
        Self { amplitude: 0.0, frequency_scale: 0.0, extra: None }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 && self.extra.is_none()
    }

    /// Torque at time `t` for the agent with one-based index `agent_index`.
    pub fn torque(&self, agent_index: usize, t: f64) -> Vec2 {
        let base = self.amplitude * (self.frequency_scale * agent_index as f64 * t).sin();
        let mut d = Vec2::new(base, base);
        if let Some(extra) = &self.extra {
            d += match extra {
                Waveform::Constant { value } => Vec2::new(value[0], value[1]),
                Waveform::Sine { amplitude, frequency, phase } => {
                    let s = (frequency * t + phase).sin();
                    Vec2::new(amplitude[0] * s, amplitude[1] * s)
                }
            };
        }
        d
    }

    /// A finite bound on the disturbance norm (not disclosed to controllers).
    pub fn bound(&self) -> f64 {
        let base = self.amplitude.abs() * 2.0_f64.sqrt();
        let extra = match &self.extra {
            None => 0.0,
            Some(Waveform::Constant { value }) => Vec2::new(value[0], value[1]).norm(),
            Some(Waveform::Sine { amplitude, .. }) => {
                Vec2::new(amplitude[0], amplitude[1]).norm()
            }
        };
        base + extra
    }
}
