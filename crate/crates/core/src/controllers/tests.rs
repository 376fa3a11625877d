use super::*;
use crate::dynamics::{forward_dynamics, gravity_vector, ArmParameters};
use crate::graphs::DirectedGraphSpec;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn reference_arm() -> ArmParameters {
    ArmParameters::new(1.0, 0.8, 0.8, 0.6, 0.4, 0.3, 0.0533, 0.024, 9.81).unwrap()
}

/// Initial states of the six-agent benchmark scenario.
fn benchmark_states() -> Vec<PlantState> {
    let q0 = [
        [-1.0, 1.0],
        [0.0, 1.0],
        [0.1, -1.0],
        [-0.5, -1.0],
        [0.0, -0.5],
        [0.1, -0.5],
    ];
    let qd0 = [
        [-0.25, 0.25],
        [-0.25, 0.15],
        [0.02, 0.12],
        [-0.25, -0.15],
        [0.0, -0.25],
        [0.15, 0.0],
    ];
    q0.iter()
        .zip(qd0)
        .map(|(q, qd)| PlantState::new(Vec2::new(q[0], q[1]), Vec2::new(qd[0], qd[1])))
        .collect()
}

fn view_for(
    graph: &DirectedGraphSpec,
    states: &[PlantState],
    i: usize,
    with_velocities: bool,
) -> NeighborView {
    if with_velocities {
        NeighborView::with_velocities(
            graph
                .in_neighbors(i)
                .map(|(j, w)| {
                    (w, states[i].q - states[j].q, states[i].qdot - states[j].qdot)
                })
                .collect(),
        )
    } else {
        NeighborView::positions_only(
            graph.in_neighbors(i).map(|(j, w)| (w, states[i].q - states[j].q)).collect(),
        )
    }
}

/// Independent evaluation of `M(theta) x + C(theta) y + g(theta)` with the
/// model matrices assembled directly from a lumped-parameter vector. Used
/// as the duplicate implementation of `Y(q, qd, x, y) theta`.
fn model_torque(theta: &Vec5, grav: f64, q: &Vec2, qdot: &Vec2, x: &Vec2, y: &Vec2) -> Vec2 {
    let c2 = q[1].cos();
    let s2 = q[1].sin();
    let m = Mat2::new(
        theta[0] + theta[1] + 2.0 * theta[2] * c2,
        theta[1] + theta[2] * c2,
        theta[1] + theta[2] * c2,
        theta[1],
    );
    let c = Mat2::new(
        -theta[2] * s2 * qdot[1],
        -theta[2] * s2 * (qdot[0] + qdot[1]),
        theta[2] * s2 * qdot[0],
        0.0,
    );
    let g = Vec2::new(
        grav * (theta[3] * q[0].cos() + theta[4] * (q[0] + q[1]).cos()),
        grav * theta[4] * (q[0] + q[1]).cos(),
    );
    m * x + c * y + g
}

/// Columns of the regressor recovered one at a time from `model_torque`
/// with unit parameter vectors; gives `Y^T s` without touching `regressor`.
fn oracle_y_transpose(grav: f64, q: &Vec2, qdot: &Vec2, x: &Vec2, y: &Vec2, s: &Vec2) -> Vec5 {
    Vec5::from_fn(|k, _| {
        let mut unit = Vec5::zeros();
        unit[k] = 1.0;
        model_torque(&unit, grav, q, qdot, x, y).dot(s)
    })
}

fn nontrivial_adaptive() -> AdaptiveState {
    AdaptiveState {
        theta_hat: Vec5::new(0.1, -0.2, 0.3, 0.5, -0.1),
        d_hat: 0.15,
        k_hat: 0.4,
        integral_vartheta: Vec2::new(0.01, -0.02),
        z: Vec2::new(-0.9, 1.05),
        zdot: Vec2::new(0.05, -0.03),
        d_bar: 0.02,
    }
}

#[test]
fn variant_names_round_trip() {
    for v in ControllerVariant::ALL {
        assert_eq!(ControllerVariant::parse(v.name()).unwrap(), v);
    }
    assert!(ControllerVariant::parse("pid").is_err());
}

#[test]
fn rest_consensus_is_a_fixed_point_of_every_law() {
    let arm = reference_arm();
    let q = Vec2::new(0.4, -0.8);
    let plant = PlantState::new(q, Vec2::zeros());
    let gains = ControllerGains::default();
    let gravity_comp = gravity_vector(&arm, &q);

    // All neighbors sit at the same state, so every relative entry is zero.
    let vel_view =
        NeighborView::with_velocities(vec![(1.0, Vec2::zeros(), Vec2::zeros())]);
    let pos_view = NeighborView::positions_only(vec![(1.0, Vec2::zeros())]);

    let mut adaptive = AdaptiveState { theta_hat: *arm.theta(), ..Default::default() };

    let step = ctrl_baseline_step(&gains, arm.gravity, &plant, &vel_view, &adaptive).unwrap();
    assert!((step.tau - gravity_comp).amax() <= 1e-12);

    let step = ctrl_fixed_step(&gains, arm.gravity, &plant, &vel_view, &adaptive, 0.3).unwrap();
    assert!((step.tau - gravity_comp).amax() <= 1e-12);

    adaptive.k_hat = 0.7;
    let step =
        ctrl_fixed_novel_step(&gains, arm.gravity, &plant, &pos_view, &adaptive, 0.3).unwrap();
    assert!((step.tau - gravity_comp).amax() <= 1e-12);

    // Reference state initialized at w(0) = qd + q = q.
    adaptive.z = q;
    let step =
        ctrl_switching_step(&gains, arm.gravity, &plant, &vel_view, &adaptive, 0.3).unwrap();
    assert!((step.tau - gravity_comp).amax() <= 1e-12);

    adaptive.z = q;
    adaptive.zdot = Vec2::zeros();
    let step =
        ctrl_switching_novel_step(&gains, arm.gravity, &plant, &pos_view, &adaptive, 0.3)
            .unwrap();
    assert!((step.tau - gravity_comp).amax() <= 1e-12);

    // The torque holds the plant at rest.
    let qdd = forward_dynamics(&arm, &plant, &gravity_comp, &Vec2::zeros()).unwrap();
    assert!(qdd.amax() <= 1e-12);
}

#[test]
fn baseline_isolated_agent() {
    let arm = reference_arm();
    let plant = PlantState::new(Vec2::new(0.2, -0.4), Vec2::new(0.3, 0.1));
    let gains = ControllerGains::default();
    let adaptive = AdaptiveState { theta_hat: Vec5::new(0.3, 0.1, -0.2, 0.4, 0.2), ..Default::default() };
    let view = NeighborView::with_velocities(vec![]);
    let step = ctrl_baseline_step(&gains, arm.gravity, &plant, &view, &adaptive).unwrap();
    assert_eq!(step.sliding, plant.qdot);
    let expected = -gains.feedback * plant.qdot
        + model_torque(
            &adaptive.theta_hat,
            arm.gravity,
            &plant.q,
            &plant.qdot,
            &Vec2::zeros(),
            &Vec2::zeros(),
        );
    assert!((step.tau - expected).amax() <= 1e-12);
}

#[test]
fn baseline_pair_sliding_variable_by_hand() {
    let arm = reference_arm();
    let q0 = Vec2::new(0.3, -0.1);
    let q1 = Vec2::new(-0.2, 0.4);
    let qd0 = Vec2::new(0.05, -0.02);
    let qd1 = Vec2::new(-0.1, 0.2);
    let gains = ControllerGains { alpha: 0.7, ..Default::default() };
    let plant = PlantState::new(q0, qd0);
    let view = NeighborView::with_velocities(vec![(1.0, q0 - q1, qd0 - qd1)]);
    let step =
        ctrl_baseline_step(&gains, arm.gravity, &plant, &view, &AdaptiveState::default())
            .unwrap();
    // s = qd + alpha a_01 (q0 - q1), evaluated directly.
    let expected = Vec2::new(0.05 + 0.7 * 0.5, -0.02 + 0.7 * (-0.5));
    assert!((step.sliding - expected).amax() <= 1e-15);
}

#[test]
fn robust_term_vanishes_on_the_sliding_surface() {
    let arm = reference_arm();
    let gains = ControllerGains::default();
    let plant = PlantState::new(Vec2::new(0.5, 0.2), Vec2::new(0.1, -0.3));
    // Choose the integral state so that s = vartheta + integral = 0.
    let view = NeighborView::with_velocities(vec![(1.0, Vec2::new(0.2, -0.1), Vec2::zeros())]);
    let vartheta = plant.qdot + view.weighted_rel_pos() * gains.alpha;
    let base = AdaptiveState { integral_vartheta: -vartheta, ..Default::default() };
    let with_gain = AdaptiveState { d_hat: 5.0, ..base };

    let tau0 = ctrl_fixed_step(&gains, arm.gravity, &plant, &view, &base, 1.0).unwrap();
    let tau1 = ctrl_fixed_step(&gains, arm.gravity, &plant, &view, &with_gain, 1.0).unwrap();
    assert!(tau0.sliding.amax() <= 1e-15);
    // d_hat multiplies s/(|s|+mu) which is exactly zero here.
    assert_eq!(tau0.tau, tau1.tau);
}

#[test]
fn torque_is_continuous_at_zero_sliding() {
    let arm = reference_arm();
    let gains = ControllerGains::default();
    let plant = PlantState::new(Vec2::new(0.5, 0.2), Vec2::zeros());
    let adaptive = AdaptiveState { d_hat: 2.0, ..Default::default() };
    let at = |s1: f64| {
        let view = NeighborView::with_velocities(vec![(
            1.0,
            Vec2::new(s1 / gains.alpha, 0.0),
            Vec2::zeros(),
        )]);
        ctrl_fixed_step(&gains, arm.gravity, &plant, &view, &adaptive, 2.0).unwrap().tau
    };
    let base = at(0.0);
    for eps in [1e-6, 1e-9, 1e-12] {
        let diff = (at(eps) - base).norm();
        assert!(diff <= 10.0 * eps * (1.0 + base.norm()), "eps {eps}: diff {diff}");
    }
}

#[test]
fn velocity_information_contract() {
    let arm = reference_arm();
    let gains = ControllerGains::default();
    let plant = PlantState::new(Vec2::zeros(), Vec2::zeros());
    let adaptive = AdaptiveState::default();
    let pos_view = NeighborView::positions_only(vec![(1.0, Vec2::new(0.1, 0.0))]);
    let vel_view =
        NeighborView::with_velocities(vec![(1.0, Vec2::new(0.1, 0.0), Vec2::zeros())]);

    assert!(matches!(
        ctrl_baseline_step(&gains, arm.gravity, &plant, &pos_view, &adaptive),
        Err(ControllerError::MissingRelativeVelocity)
    ));
    assert!(matches!(
        ctrl_fixed_step(&gains, arm.gravity, &plant, &pos_view, &adaptive, 0.0),
        Err(ControllerError::MissingRelativeVelocity)
    ));
    assert!(matches!(
        ctrl_switching_step(&gains, arm.gravity, &plant, &pos_view, &adaptive, 0.0),
        Err(ControllerError::MissingRelativeVelocity)
    ));
    assert!(matches!(
        ctrl_fixed_novel_step(&gains, arm.gravity, &plant, &vel_view, &adaptive, 0.0),
        Err(ControllerError::RelativeVelocityNotAllowed)
    ));
    assert!(matches!(
        ctrl_switching_novel_step(&gains, arm.gravity, &plant, &vel_view, &adaptive, 0.0),
        Err(ControllerError::RelativeVelocityNotAllowed)
    ));
}

#[test]
fn fixed_step_matches_duplicate_evaluator() {
    let arm = reference_arm();
    let graph = crate::graphs::tests::six_agent_graph();
    let states = benchmark_states();
    let gains = ControllerGains::default();
    let adaptive = nontrivial_adaptive();
    let t = 0.5;
    let mu = (-t).exp();

    for i in 0..6 {
        let view = view_for(&graph, &states, i, true);
        let step = ctrl_fixed_step(&gains, arm.gravity, &states[i], &view, &adaptive, t).unwrap();

        // Duplicate evaluation with explicit sums over the adjacency row.
        let mut p = Vec2::zeros();
        let mut v = Vec2::zeros();
        for j in 0..6 {
            let a = graph.adjacency()[(i, j)];
            p += (states[i].q - states[j].q) * a;
            v += (states[i].qdot - states[j].qdot) * a;
        }
        let vartheta = states[i].qdot + p * gains.alpha;
        let s = vartheta + adaptive.integral_vartheta;
        let qdot_r = -p * gains.alpha - adaptive.integral_vartheta;
        let qddot_r = -v * gains.alpha - vartheta;
        let feedforward =
            model_torque(&adaptive.theta_hat, arm.gravity, &states[i].q, &states[i].qdot, &qddot_r, &qdot_r);
        let tau = -gains.feedback * s + feedforward - s * (adaptive.d_hat / (s.norm() + mu));
        assert!((step.tau - tau).amax() <= 1e-12, "agent {i}");

        let theta_dot = -gains.adaptation
            * oracle_y_transpose(arm.gravity, &states[i].q, &states[i].qdot, &qddot_r, &qdot_r, &s);
        assert!((step.derivatives.theta_hat - theta_dot).amax() <= 1e-12);
        assert_relative_eq!(
            step.derivatives.d_hat,
            gains.delta * s.norm_squared() / (s.norm() + mu),
            epsilon = 1e-14
        );
        assert_eq!(step.derivatives.integral_vartheta, vartheta);
    }
}

#[test]
fn fixed_novel_step_matches_duplicate_evaluator() {
    let arm = reference_arm();
    let graph = crate::graphs::tests::six_agent_graph();
    let states = benchmark_states();
    let gains = ControllerGains::default();
    let adaptive = nontrivial_adaptive();
    let t = 0.5;
    let mu = (-t).exp();

    for i in 0..6 {
        let view = view_for(&graph, &states, i, false);
        let step =
            ctrl_fixed_novel_step(&gains, arm.gravity, &states[i], &view, &adaptive, t).unwrap();

        let mut p = Vec2::zeros();
        for j in 0..6 {
            p += (states[i].q - states[j].q) * graph.adjacency()[(i, j)];
        }
        let vartheta = states[i].qdot + p * gains.alpha;
        let s = vartheta + adaptive.integral_vartheta;
        let qdot_r = -p * gains.alpha - adaptive.integral_vartheta;
        let feedforward = model_torque(
            &adaptive.theta_hat,
            arm.gravity,
            &states[i].q,
            &states[i].qdot,
            &Vec2::zeros(),
            &qdot_r,
        );
        let tau = -s * adaptive.k_hat + feedforward - s * (adaptive.d_hat / (s.norm() + mu));
        assert!((step.tau - tau).amax() <= 1e-12, "agent {i}");
        assert_relative_eq!(step.derivatives.k_hat, gains.gamma * s.norm_squared(), epsilon = 1e-14);
        assert!(step.derivatives.k_hat >= 0.0);
        assert!(step.derivatives.d_hat >= 0.0);
    }
}

#[test]
fn switching_step_matches_duplicate_evaluator_on_second_graph() {
    let arm = reference_arm();
    // At t = 3 s the second graph of the alternating pair is active.
    let graph = crate::graphs::tests::six_agent_half_b();
    let states = benchmark_states();
    let gains = ControllerGains::default();
    let adaptive = nontrivial_adaptive();
    let t = 3.0;
    let mu = (-t).exp();

    for i in 0..6 {
        let view = view_for(&graph, &states, i, true);
        let step =
            ctrl_switching_step(&gains, arm.gravity, &states[i], &view, &adaptive, t).unwrap();

        let mut sum = Vec2::zeros();
        for j in 0..6 {
            let a = graph.adjacency()[(i, j)];
            sum += (states[i].q - states[j].q + states[i].qdot - states[j].qdot) * a;
        }
        let zdot = -sum * gains.alpha;
        let w = states[i].qdot + states[i].q;
        let e = w - adaptive.z;
        let x = states[i].qdot - zdot;
        let y_arg = states[i].q - adaptive.z;
        let feedforward =
            model_torque(&adaptive.theta_hat, arm.gravity, &states[i].q, &states[i].qdot, &x, &y_arg);
        let tau = -gains.feedback * e + feedforward - e * (adaptive.d_hat / (e.norm() + mu));
        assert!((step.tau - tau).amax() <= 1e-12, "agent {i}");
        assert_eq!(step.derivatives.z, zdot);
        let theta_dot = -gains.adaptation
            * oracle_y_transpose(arm.gravity, &states[i].q, &states[i].qdot, &x, &y_arg, &e);
        assert!((step.derivatives.theta_hat - theta_dot).amax() <= 1e-12);
    }
}

#[test]
fn switching_novel_step_matches_duplicate_evaluator() {
    let arm = reference_arm();
    let graph = crate::graphs::tests::six_agent_half_b();
    let states = benchmark_states();
    let gains = ControllerGains::default();
    let adaptive = nontrivial_adaptive();
    let t = 3.0;
    let mu = (-t).exp();

    for i in 0..6 {
        let view = view_for(&graph, &states, i, false);
        let step =
            ctrl_switching_novel_step(&gains, arm.gravity, &states[i], &view, &adaptive, t)
                .unwrap();

        let mut p = Vec2::zeros();
        let mut degree = 0.0;
        for j in 0..6 {
            let a = graph.adjacency()[(i, j)];
            p += (states[i].q - states[j].q) * a;
            degree += a;
        }
        let k = gains.reference_k;
        let zddot = -p - states[i].qdot * (degree / k + k);
        let e = states[i].q - adaptive.z;
        let edot = states[i].qdot - adaptive.zdot;
        let w = edot + e;
        let x = zddot - edot;
        let y_arg = adaptive.zdot - e;
        let feedforward =
            model_torque(&adaptive.theta_hat, arm.gravity, &states[i].q, &states[i].qdot, &x, &y_arg);
        let tau = -gains.feedback * w + feedforward - w * (adaptive.d_hat / (w.norm() + mu));
        assert!((step.tau - tau).amax() <= 1e-12, "agent {i}");
        assert_eq!(step.derivatives.z, adaptive.zdot);
        assert_eq!(step.derivatives.zdot, zddot);
    }
}

#[test]
fn switching_law_handles_momentarily_edgeless_graph() {
    let arm = reference_arm();
    let gains = ControllerGains::default();
    let plant = PlantState::new(Vec2::new(0.1, 0.2), Vec2::new(-0.3, 0.4));
    let adaptive = nontrivial_adaptive();
    let view = NeighborView::with_velocities(vec![]);
    let step = ctrl_switching_step(&gains, arm.gravity, &plant, &view, &adaptive, 1.0).unwrap();
    assert_eq!(step.derivatives.z, Vec2::zeros());
    assert!(step.tau.iter().all(|v| v.is_finite()));
}

#[test]
fn sigma_modification_reduces_to_plain_update() {
    let (d_hat_dot, d_bar_dot) = sigma_mod_d_update(0.2, 0.0, 0.0, 0.5, 0.1, 1.0, 0.3);
    assert_relative_eq!(d_hat_dot, 0.2 * 0.25 / 0.6, epsilon = 1e-15);
    assert_eq!(d_bar_dot, 0.0);

    let (d_hat_dot, d_bar_dot) = sigma_mod_d_update(0.2, 0.4, 0.7, 0.0, 0.1, 0.5, 0.5);
    assert_eq!(d_hat_dot, 0.0);
    assert_eq!(d_bar_dot, 0.0);
}

#[test]
fn sigma_modification_difference_fixed_point() {
    // With constant drive c = |s|^2/(|s|+mu), the difference x = d_hat - d_bar
    // has the equilibrium x* = delta c / (delta sigma + gamma).
    let (delta, sigma, gamma) = (0.2, 0.4, 0.7);
    let (s_norm, mu) = (0.5, 0.1);
    let c = s_norm * s_norm / (s_norm + mu);
    let x_star = delta * c / (delta * sigma + gamma);
    let (d_hat_dot, d_bar_dot) =
        sigma_mod_d_update(delta, sigma, gamma, s_norm, mu, x_star, 0.0);
    assert_relative_eq!(d_hat_dot - d_bar_dot, 0.0, epsilon = 1e-15);
}

#[test]
fn sigma_modification_is_used_by_the_fixed_law() {
    let arm = reference_arm();
    let plant = PlantState::new(Vec2::new(0.5, 0.2), Vec2::new(0.1, -0.3));
    let view = NeighborView::with_velocities(vec![(1.0, Vec2::new(0.2, -0.1), Vec2::zeros())]);
    let adaptive = AdaptiveState { d_hat: 1.0, d_bar: 0.2, ..Default::default() };
    let plain = ControllerGains::default();
    let modified = ControllerGains {
        sigma_mod: Some(SigmaModification { sigma: 0.3, gamma: 0.6 }),
        ..Default::default()
    };
    let t = 1.0;
    let a = ctrl_fixed_step(&plain, arm.gravity, &plant, &view, &adaptive, t).unwrap();
    let b = ctrl_fixed_step(&modified, arm.gravity, &plant, &view, &adaptive, t).unwrap();
    // Same torque, different d_hat bookkeeping.
    assert_eq!(a.tau, b.tau);
    assert_relative_eq!(
        b.derivatives.d_hat,
        a.derivatives.d_hat - plain.delta * 0.3 * (1.0 - 0.2),
        epsilon = 1e-14
    );
    assert_relative_eq!(b.derivatives.d_bar, 0.6 * (1.0 - 0.2), epsilon = 1e-14);
    assert_eq!(a.derivatives.d_bar, 0.0);
}

#[test]
fn gain_validation() {
    assert!(ControllerGains::default().validate().is_ok());
    let bad = ControllerGains { delta: -1.0, ..Default::default() };
    assert!(matches!(bad.validate(), Err(ControllerError::InvalidGain { field: "delta", .. })));
    let asym = ControllerGains {
        feedback: Mat2::new(2.0, 1.0, -1.0, 2.0),
        ..Default::default()
    };
    assert!(matches!(asym.validate(), Err(ControllerError::InvalidGain { field: "k_gain", .. })));
    let indefinite = ControllerGains {
        adaptation: Mat5::identity() * -5.0,
        ..Default::default()
    };
    assert!(matches!(
        indefinite.validate(),
        Err(ControllerError::InvalidGain { field: "lambda", .. })
    ));
}

#[test]
fn mu_functions_positive_and_decaying() {
    for t in [0.0, 0.5, 10.0, 120.0] {
        assert!(MuFunction::ExpNegT.eval(t) > 0.0);
        assert!(MuFunction::InvSquare.eval(t) > 0.0);
    }
    assert_relative_eq!(MuFunction::ExpNegT.eval(0.0), 1.0);
    assert_relative_eq!(MuFunction::InvSquare.eval(1.0), 0.25);
}

proptest! {
    /// The disturbance-rejection term never exceeds d_hat in norm, for any
    /// sliding variable and any positive mu.
    #[test]
    fn robust_term_norm_bounded_by_d_hat(
        s1 in -10.0f64..10.0,
        s2 in -10.0f64..10.0,
        d_hat in 0.0f64..100.0,
        t in 0.0f64..60.0,
    ) {
        let arm = reference_arm();
        let gains = ControllerGains::default();
        let plant = PlantState::new(Vec2::new(0.5, 0.2), Vec2::zeros());
        let view = NeighborView::with_velocities(vec![(
            1.0,
            Vec2::new(s1 / gains.alpha, s2 / gains.alpha),
            Vec2::zeros(),
        )]);
        let without = AdaptiveState::default();
        let with = AdaptiveState { d_hat, ..Default::default() };
        let tau0 = ctrl_fixed_step(&gains, arm.gravity, &plant, &view, &without, t).unwrap().tau;
        let tau1 = ctrl_fixed_step(&gains, arm.gravity, &plant, &view, &with, t).unwrap().tau;
        prop_assert!((tau1 - tau0).norm() <= d_hat * (1.0 + 1e-12));
    }
}
