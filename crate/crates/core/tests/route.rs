use dmp_avoid::dmp::{LocalFrame, Vec3};
use dmp_avoid::geometry::Ellipsoid;
use dmp_avoid::route::*;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

fn sphere(c: Vec3, r: f64) -> Ellipsoid {
    Ellipsoid::axis_aligned(c, Vec3::repeat(r)).unwrap()
}

fn ring_for(obstacles: &[Ellipsoid], ws: Option<&WorkspaceModel>, n: usize) -> CostRing {
    build_cost_ring(&Vec3::zeros(), &Vec3::x(), obstacles, 0.05, ws, n).unwrap()
}

#[test]
fn four_direction_ring_is_symmetric() {
    // obstacle straight on the chord: every side costs the same
    let ring = ring_for(&[sphere(Vec3::new(0.5, 0.0, 0.0), 0.1)], None, 4);
    assert_eq!(ring.omegas, vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);
    for i in 1..4 {
        assert!((ring.raw_length[i] - ring.raw_length[0]).abs() < 1e-12);
    }
    assert_eq!(select_direction(&ring).unwrap(), 0.0);
}

#[test]
fn passes_below_an_obstacle_above_the_chord() {
    let ring = ring_for(&[sphere(Vec3::new(0.5, 0.0, 0.05), 0.1)], None, 4);
    assert_eq!(select_direction(&ring).unwrap(), 3.0 * FRAC_PI_2);
}

#[test]
fn table_excludes_lower_directions() {
    let ws = WorkspaceModel { table_height: Some(-0.01), center: Vec3::new(0.5, 0.0, 0.3), radius: 1.0 };
    let ring = ring_for(&[sphere(Vec3::new(0.5, 0.0, 0.05), 0.1)], Some(&ws), 72);
    let w = select_direction(&ring).unwrap();
    let i = ring.omegas.iter().position(|&o| o == w).unwrap();
    assert_eq!(ring.table[i], 0.0, "picked omega {w}");
    assert_eq!(ring.total[i], ring.min_total());
    assert!(ring.omegas.iter().zip(&ring.table).any(|(o, t)| o.sin() < -0.5 && *t == 1.0));
}

#[test]
fn infeasible_ring_is_an_error() {
    // a workspace too small to hold any passing point
    let ws = WorkspaceModel { table_height: None, center: Vec3::new(5.0, 5.0, 5.0), radius: 0.1 };
    let r = build_cost_ring(&Vec3::zeros(), &Vec3::x(), &[sphere(Vec3::new(0.5, 0.0, 0.0), 0.1)], 0.05, Some(&ws), 8);
    assert!(r.is_err());
    assert!(build_cost_ring(&Vec3::zeros(), &Vec3::x(), &[], 0.05, None, 8).is_err());
    assert!(build_cost_ring(&Vec3::zeros(), &Vec3::x(), &[sphere(Vec3::x() * 0.5, 0.1)], 0.05, None, 3).is_err());
}

#[test]
fn guidance_direction_blends_axis_and_side() {
    let f = LocalFrame::from_start_goal(Vec3::zeros(), Vec3::x()).unwrap();
    let g = direction_to_guidance(FRAC_PI_2, &f, PI / 4.0).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((g.xdot_d - Vec3::new(h, 0.0, h)).norm() < 1e-12);
    assert!(direction_to_guidance(0.0, &f, 2.0).is_err());
}

proptest! {
    #[test]
    fn ring_invariants(
        c in prop::array::uniform3(-0.3f64..0.3),
        r in 0.03f64..0.2,
        table in prop::option::of(-0.3f64..0.0),
        n in 4usize..90,
    ) {
        let e = sphere(Vec3::new(0.5 + c[0], c[1], c[2]), r);
        let ws = WorkspaceModel { table_height: table, center: Vec3::new(0.5, 0.0, 0.0), radius: 2.0 };
        let Ok(ring) = build_cost_ring(&Vec3::zeros(), &Vec3::x(), &[e], 0.05, Some(&ws), n) else {
            return Ok(());
        };
        prop_assert_eq!(ring.len(), n);
        for i in 0..n {
            prop_assert!((0.0..=1.0).contains(&ring.length[i]));
            prop_assert_eq!(ring.total[i], ring.table[i] + ring.length[i] + ring.limits[i]);
            prop_assert!((ring.omegas[i] - TAU * i as f64 / n as f64).abs() < 1e-15);
        }
        let w = select_direction(&ring).unwrap();
        let i = ring.omegas.iter().position(|&o| o == w).unwrap();
        prop_assert!(ring.feasible(i));
        prop_assert_eq!(ring.total[i], ring.min_total());
    }

    #[test]
    fn mirror_obstacle_mirrors_ring(y in 0.01f64..0.2, z in 0.01f64..0.2, r in 0.03f64..0.2) {
        let n = 72;
        let a = ring_for(&[sphere(Vec3::new(0.5, y, z), r)], None, n);
        let b = ring_for(&[sphere(Vec3::new(0.5, y, -z), r)], None, n);
        for i in 0..n {
            let j = (n - i) % n;
            prop_assert!((a.raw_length[i] - b.raw_length[j]).abs() < 1e-12);
        }
    }
}
