use navtune::geom::{normalize_angle, Pose2D};
use navtune::nav::ParameterSet;
use navtune::robot::{clamp_action, integrate, step, Action, KinematicLimits, RobotState};
use navtune::sim::{Sim, SimConfig, StepStatus};
use navtune::world::{generate_ca_world, CaConfig};
use proptest::prelude::*;

fn fine_euler(pose: &Pose2D, vel: Action, dt: f64, n: usize) -> Pose2D {
    let h = dt / n as f64;
    let (mut x, mut y, mut th) = (pose.x, pose.y, pose.theta);
    for _ in 0..n {
        let mid = th + 0.5 * vel.w * h;
        x += vel.v * mid.cos() * h;
        y += vel.v * mid.sin() * h;
        th += vel.w * h;
    }
    Pose2D::new(x, y, th)
}

#[test]
fn straight_and_spin() {
    let p = integrate(&Pose2D::new(1.0, 2.0, 0.0), Action::new(1.0, 0.0), 0.5);
    assert!((p.x - 1.5).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
    let q = integrate(&Pose2D::new(0.0, 0.0, 0.0), Action::new(0.0, 1.0), 0.5);
    assert!(q.x.abs() < 1e-12 && q.y.abs() < 1e-12 && (q.theta - 0.5).abs() < 1e-12);
    let half = integrate(&Pose2D::new(0.0, 0.0, 0.0), Action::new(1.0, 1.0), std::f64::consts::PI);
    assert!(half.x.abs() < 1e-12 && (half.y - 2.0).abs() < 1e-12);
}

#[test]
fn reverse_is_capped() {
    let l = KinematicLimits::default();
    assert_eq!(clamp_action(Action::new(-5.0, 0.0), &l).v, -0.2);
    let r = KinematicLimits {
        allow_reverse: true,
        ..l
    };
    assert_eq!(clamp_action(Action::new(-5.0, 0.0), &r).v, -2.0);
    assert_eq!(clamp_action(Action::new(f64::NAN, 9.0), &l), Action::new(0.0, 3.14));
}

#[test]
fn open_loop_sim_is_deterministic() {
    let world = generate_ca_world(&CaConfig {
        seed: 4,
        ..CaConfig::default()
    })
    .unwrap()
    .world;
    let run = || {
        let mut sim = Sim::new(world.clone(), SimConfig::default(), 9).unwrap();
        let theta = ParameterSet::default();
        let mut trace = Vec::new();
        for _ in 0..200 {
            let x = sim.observe();
            let d = sim.autopilot(&x, &theta).unwrap();
            trace.push(sim.state().robot);
            if sim.advance(d.action) != StepStatus::Running {
                break;
            }
        }
        trace
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn arc_matches_fine_integration(
        x in -5.0f64..5.0, y in -5.0f64..5.0, th in -3.1f64..3.1,
        v in -0.5f64..2.0, w in -3.0f64..3.0, dt in 0.001f64..0.2,
    ) {
        let p = Pose2D::new(x, y, th);
        let a = integrate(&p, Action::new(v, w), dt);
        let b = fine_euler(&p, Action::new(v, w), dt, 2000);
        prop_assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
        prop_assert!(normalize_angle(a.theta - b.theta).abs() < 1e-9);
    }

    #[test]
    fn velocity_changes_within_acceleration_limits(
        v0 in -0.2f64..2.0, w0 in -3.0f64..3.0,
        cv in -10.0f64..10.0, cw in -10.0f64..10.0, dt in 0.001f64..0.2,
    ) {
        let l = KinematicLimits::default();
        let s = RobotState { pose: Pose2D::default(), vel: Action::new(v0, w0), t: 0.0 };
        let n = step(&s, Action::new(cv, cw), &l, dt);
        prop_assert!((n.vel.v - v0).abs() <= l.max_acc_v * dt + 1e-12);
        prop_assert!((n.vel.w - w0).abs() <= l.max_acc_w * dt + 1e-12);
        prop_assert!((n.t - dt).abs() < 1e-15);
        prop_assert!(n.pose.theta > -std::f64::consts::PI && n.pose.theta <= std::f64::consts::PI);
    }

    #[test]
    fn step_is_pure(v in 0.0f64..2.0, w in -3.0f64..3.0, seed_th in -3.0f64..3.0) {
        let s = RobotState::at_rest(Pose2D::new(0.3, -0.2, seed_th));
        let l = KinematicLimits::default();
        prop_assert_eq!(step(&s, Action::new(v, w), &l, 0.05), step(&s, Action::new(v, w), &l, 0.05));
    }
}
