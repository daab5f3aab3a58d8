use dmp_avoid::coupling::AvoidanceParams;
use dmp_avoid::dmp::Vec3;
use dmp_avoid::geometry::Ellipsoid;
use dmp_avoid::sim::*;
use proptest::prelude::*;

fn params() -> FixedParams {
    FixedParams(AvoidanceParams::new(200.0, 1.0, 20.0).unwrap())
}

fn scene(center: Vec3, axes: Vec3, clearance: Option<f64>) -> Scenario {
    let e = Ellipsoid::axis_aligned(center, axes).unwrap();
    Scenario::new(Vec3::zeros(), Vec3::x(), vec![Obstacle::point_system(e)], clearance).unwrap()
}

fn recorded() -> EpisodeOptions {
    EpisodeOptions { record: true, ..Default::default() }
}

#[test]
fn free_space_runs_straight() {
    let sc = Scenario::new(Vec3::zeros(), Vec3::new(1.0, 0.5, -0.2), vec![], None).unwrap();
    let (traj, m) = run_episode(&sc, &params(), &recorded()).unwrap();
    assert!(!m.collided && m.clearance.is_infinite());
    assert!(m.convergence < 1e-3, "{m:?}");
    assert_eq!(m.tau, 1.0);
    let dir = sc.goal.normalize();
    for p in &traj.positions {
        assert!((p - dir * p.dot(&dir)).norm() < 1e-12);
    }
}

#[test]
fn recorded_trajectory_reproduces_metrics() {
    let sc = scene(Vec3::new(0.5, 0.02, 0.01), Vec3::new(0.1, 0.08, 0.12), None);
    let (traj, m) = run_episode(&sc, &params(), &recorded()).unwrap();
    let ob = sc.obstacles[0].dilated;
    let clearance = traj.positions.iter().map(|p| ob.distance(p)).fold(f64::INFINITY, f64::min);
    assert!((clearance - m.clearance).abs() < 1e-12);
    assert!((traj.positions.last().unwrap() - sc.goal).norm() - m.convergence < 1e-12);
    assert!(!m.collided && m.clearance > 0.0);
    assert_eq!(traj.times.len(), traj.positions.len());
    assert_eq!(traj.descriptors.len(), traj.positions.len());
    let (_, quiet) = run_episode(&sc, &params(), &EpisodeOptions::default()).unwrap();
    assert_eq!(quiet, m);
}

#[test]
fn episodes_are_deterministic() {
    let sc = scene(Vec3::new(0.45, -0.03, 0.02), Vec3::new(0.12, 0.1, 0.06), Some(0.1));
    let opts = EpisodeOptions { guided: true, ..recorded() };
    let a = run_episode(&sc, &params(), &opts).unwrap();
    let b = run_episode(&sc, &params(), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tau_scaling_stretches_duration() {
    let sc = scene(Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.1, 0.15, 0.15), None);
    let (_, scaled) = run_episode(&sc, &params(), &EpisodeOptions::default()).unwrap();
    let (_, fixed) = run_episode(&sc, &params(), &EpisodeOptions { scale_tau: false, ..Default::default() }).unwrap();
    assert!(scaled.tau > 1.0);
    assert_eq!(fixed.tau, 1.0);
}

#[test]
fn dead_zone_head_on() {
    let s = DeadZoneSetup::on_chord(0.0, AvoidanceParams::new(100.0, 0.5, 20.0).unwrap()).unwrap();
    let c = compare_dead_zone(&s).unwrap();
    assert!(c.original.collided && !c.proposed.collided);
}

#[test]
fn scenario_file_round_trip() {
    let mut sc = scene(Vec3::new(0.5, 0.1, 0.0), Vec3::new(0.1, 0.05, 0.2), Some(0.1));
    sc.seed = 4;
    let text = serde_json::to_string(&sc.to_file()).unwrap();
    let back = Scenario::from_json(&text).unwrap();
    assert_eq!(back.dilated(), sc.dilated());
    assert_eq!((back.start, back.goal, back.clearance, back.seed), (sc.start, sc.goal, sc.clearance, sc.seed));
    assert!(Scenario::new(Vec3::zeros(), Vec3::zeros(), vec![], None).is_err());
    assert!(Scenario::new(Vec3::zeros(), Vec3::x(), vec![], Some(-1.0)).is_err());
}

#[test]
fn dilation_contains_raw_body() {
    let e = Ellipsoid::axis_aligned(Vec3::zeros(), Vec3::new(0.1, 0.05, 0.08)).unwrap();
    let h = Vec3::new(0.02, 0.03, 0.01);
    let d = dilate_ellipsoid(&e, h).unwrap();
    for s in [1.0, -1.0] {
        for i in 0..3 {
            let mut p = Vec3::zeros();
            p[i] = s * e.semi_axes[i];
            assert!(d.inside_value(&p) <= 1.0, "{p:?}");
        }
    }
    assert!(d.semi_axes.iter().zip(e.semi_axes.iter()).all(|(g, r)| g > r));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fixed_params_episodes_stay_finite(
        c in prop::array::uniform3(-0.15f64..0.15),
        a in prop::array::uniform3(0.03f64..0.2),
        alpha in 10.0f64..500.0, psi in 0.2f64..1.5, kappa in 10.0f64..200.0,
    ) {
        let sc = scene(Vec3::new(0.5 + c[0], c[1], c[2]), Vec3::from(a), None);
        let pol = FixedParams(AvoidanceParams::new(alpha, psi, kappa).unwrap());
        let (traj, m) = run_episode(&sc, &pol, &recorded()).unwrap();
        prop_assert!(m.convergence.is_finite() && m.clearance.is_finite());
        prop_assert!(traj.positions.iter().all(|p| p.iter().all(|v| v.is_finite())));
        prop_assert_eq!(m.collided, traj.positions.iter().any(|p| sc.obstacles[0].dilated.inside_value(p) <= 1.0));
    }
}
