use super::episode::Trajectory;
use crate::coupling::{
    coupling_oa, coupling_original, AvoidanceParams, FallbackAxes, OriginalParams, SystemKinematics,
};
use crate::dmp::{DmpGains, DmpState, LocalFrame, Vec3, PHASE_END};
use crate::error::{invalid, Result};

/// Point obstacle near the straight path, avoided once with each coupling
/// term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeadZoneSetup {
    pub start: Vec3,
    pub goal: Vec3,
    pub obstacle: Vec3,
    pub collision_radius: f64,
    pub proposed: AvoidanceParams,
    pub original: OriginalParams,
    pub tau: f64,
    pub dt: f64,
    pub gains: DmpGains,
}

impl DeadZoneSetup {
    /// 1 m chord along x with the obstacle at its midpoint, rotated off the
    /// initial heading by `offset` rad. The original term's gain is matched
    /// so both terms share the same peak magnitude per unit speed.
    pub fn on_chord(offset: f64, proposed: AvoidanceParams) -> Result<Self> {
        let beta = 20.0 / std::f64::consts::PI;
        let gamma = proposed.alpha * std::f64::consts::E * beta;
        Ok(Self {
            start: Vec3::zeros(),
            goal: Vec3::x(),
            obstacle: Vec3::new(0.5 * offset.cos(), 0.0, 0.5 * offset.sin()),
            collision_radius: 0.05,
            proposed,
            original: OriginalParams::new(gamma, beta)?,
            tau: 1.0,
            dt: 1e-3,
            gains: DmpGains::default(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointRollout {
    pub trajectory: Trajectory,
    pub min_distance: f64,
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeadZoneComparison {
    pub original: PointRollout,
    pub proposed: PointRollout,
}

fn rollout(setup: &DeadZoneSetup, proposed: bool) -> Result<PointRollout> {
    let frame = LocalFrame::from_start_goal(setup.start, setup.goal)?;
    let fallback = FallbackAxes {
        up: frame.z_axis(),
        side: frame.y_axis(),
    };
    let mut state = DmpState::at_rest(setup.start, setup.goal, &setup.gains, setup.tau)?;
    let mut traj = Trajectory {
        tau: setup.tau,
        ..Trajectory::default()
    };
    let mut min_distance = f64::INFINITY;
    let mut t = 0.0;
    let mut end: Option<f64> = None;
    loop {
        let x = state.position();
        let v = state.velocity();
        let d = (x - setup.obstacle).norm();
        min_distance = min_distance.min(d);
        traj.times.push(t);
        traj.positions.push(x);
        traj.velocities.push(v);
        if end.is_none() && state.phase.k < PHASE_END {
            end = Some(t + 0.5 * setup.tau);
        }
        if end.is_some_and(|e| t >= e - 0.5 * setup.dt) {
            break;
        }
        let sys = SystemKinematics { x, xdot: v };
        let c = if v.norm() <= 1e-9 {
            Vec3::zeros()
        } else if proposed {
            coupling_oa(&sys, &setup.obstacle, d, &setup.proposed, &fallback)?.force
        } else {
            coupling_original(&sys, &setup.obstacle, &setup.original, &fallback).force
        };
        state = state.step(None, c, setup.dt)?;
        t += setup.dt;
    }
    Ok(PointRollout {
        trajectory: traj,
        min_distance,
        collided: min_distance < setup.collision_radius,
    })
}

pub fn compare_dead_zone(setup: &DeadZoneSetup) -> Result<DeadZoneComparison> {
    if !(setup.collision_radius > 0.0 && setup.tau > 0.0 && setup.dt > 0.0) {
        return invalid("dead-zone setup needs positive radius, tau and dt");
    }
    Ok(DeadZoneComparison {
        original: rollout(setup, false)?,
        proposed: rollout(setup, true)?,
    })
}

/// Steering magnitude per unit speed at each heading angle, evaluated
/// through the coupling terms for a unit-speed system with the obstacle
/// point at distance `d` (`d` also feeds the decay of the proposed term):
/// `(theta, proposed, original)`.
pub fn steering_profile(
    thetas: &[f64],
    d: f64,
    proposed: &AvoidanceParams,
    original: &OriginalParams,
) -> Result<Vec<(f64, f64, f64)>> {
    let fallback = FallbackAxes::default();
    let sys = SystemKinematics {
        x: Vec3::zeros(),
        xdot: Vec3::x(),
    };
    thetas
        .iter()
        .map(|&th| {
            let point = Vec3::new(th.cos(), 0.0, th.sin()) * d.max(1e-6);
            let p = coupling_oa(&sys, &point, d, proposed, &fallback)?.force.norm();
            let o = coupling_original(&sys, &point, original, &fallback).force.norm();
            Ok((th, p, o))
        })
        .collect()
}
