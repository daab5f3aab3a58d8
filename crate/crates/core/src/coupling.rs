//! Coupling terms steering a point system around obstacles.
//!
//! All terms rotate the system velocity by a quarter turn inside the plane
//! spanned by the velocity and a reference direction, so every force they
//! produce is orthogonal to the velocity.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::dmp::Vec3;
use crate::error::{invalid, Error, Result};

/// Parameters of the dead-zone-free avoidance term (and of the heading
/// guidance term, which shares its shape constants).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceParams {
    /// Strength gain.
    pub alpha: f64,
    /// Width of the heading bell, rad.
    pub psi: f64,
    /// Distance decay, 1/m^2.
    pub kappa: f64,
}

impl AvoidanceParams {
    pub fn new(alpha: f64, psi: f64, kappa: f64) -> Result<Self> {
        let p = Self { alpha, psi, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.psi > 0.0 && self.kappa > 0.0)
            || !(self.alpha.is_finite() && self.psi.is_finite() && self.kappa.is_finite())
        {
            return invalid(format!("avoidance parameters must be positive and finite: {self:?}"));
        }
        Ok(())
    }
}

/// Parameters of the original steering-angle term `gamma * theta * exp(-beta |theta|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalParams {
    pub gamma: f64,
    pub beta: f64,
}

impl OriginalParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 0.0 && beta > 0.0) {
            return invalid("original coupling needs gamma > 0 and beta > 0");
        }
        Ok(Self { gamma, beta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemKinematics {
    pub x: Vec3,
    pub xdot: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuidanceTarget {
    /// Desired heading, unit norm.
    pub xdot_d: Vec3,
    pub active: bool,
}

impl GuidanceTarget {
    pub fn new(direction: Vec3, active: bool) -> Result<Self> {
        let n = direction.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::DegenerateGeometry("guidance direction has zero length".into()));
        }
        Ok(Self {
            xdot_d: direction / n,
            active,
        })
    }
}

/// Axes used to define the rotation when velocity and reference direction
/// are parallel: first `xdot x up`, then `xdot x side`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FallbackAxes {
    pub up: Vec3,
    pub side: Vec3,
}

impl Default for FallbackAxes {
    fn default() -> Self {
        Self {
            up: Vec3::z(),
            side: Vec3::y(),
        }
    }
}

impl FallbackAxes {
    fn axis_for(&self, xdot: &Vec3) -> Vec3 {
        let a = xdot.cross(&self.up);
        if a.norm() > 1e-9 * xdot.norm() {
            return a;
        }
        let b = xdot.cross(&self.side);
        if b.norm() > 1e-9 * xdot.norm() {
            return b;
        }
        // up and side both parallel to xdot; any orthogonal axis will do
        let e = if xdot.x.abs() < 0.9 * xdot.norm() { Vec3::x() } else { Vec3::y() };
        xdot.cross(&e)
    }
}

/// Force returned by a coupling term. `degenerate` marks configurations
/// where the geometry was undefined and a zero force or fallback axis was
/// used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingForce {
    pub force: Vec3,
    pub degenerate: bool,
}

impl CouplingForce {
    pub fn zero(degenerate: bool) -> Self {
        Self {
            force: Vec3::zeros(),
            degenerate,
        }
    }
}

const MIN_SPEED: f64 = 1e-9;

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 form keeps precision near 0 and pi
    a.cross(b).norm().atan2(a.dot(b))
}

fn check_geometry(sys: &SystemKinematics, point: &Vec3) -> Result<Vec3> {
    if !(sys.x.iter().chain(sys.xdot.iter()).chain(point.iter()).all(|v| v.is_finite())) {
        return Err(Error::NonFinite("coupling inputs".into()));
    }
    if sys.xdot.norm() <= MIN_SPEED {
        return Err(Error::DegenerateGeometry("system velocity is zero".into()));
    }
    let rel = point - sys.x;
    if rel.norm() <= 1e-12 {
        return Err(Error::DegenerateGeometry("obstacle point coincides with system".into()));
    }
    Ok(rel)
}

/// Angle in `[0, pi]` between the velocity and the direction to the obstacle.
pub fn heading_angle(sys: &SystemKinematics, obstacle: &Vec3) -> Result<f64> {
    let rel = check_geometry(sys, obstacle)?;
    Ok(angle_between(&sys.xdot, &rel))
}

/// Quarter-turn rotation about `(obstacle - x) x xdot`, which turns the
/// velocity away from the obstacle. The boolean is true when the fallback
/// axis had to be used.
pub fn steering_rotation(
    sys: &SystemKinematics,
    obstacle: &Vec3,
    fallback: &FallbackAxes,
) -> Result<(Matrix3<f64>, bool)> {
    let rel = check_geometry(sys, obstacle)?;
    let r = rel.cross(&sys.xdot);
    let (axis, degenerate) = if r.norm() > 1e-9 * rel.norm() * sys.xdot.norm() {
        (r, false)
    } else {
        (fallback.axis_for(&sys.xdot), true)
    };
    Ok((quarter_turn(&axis), degenerate))
}

fn quarter_turn(axis: &Vec3) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), FRAC_PI_2).into_inner()
}

/// Original analytic term `C = R xdot gamma theta exp(-beta |theta|)`.
pub fn coupling_original(
    sys: &SystemKinematics,
    obstacle: &Vec3,
    params: &OriginalParams,
    fallback: &FallbackAxes,
) -> CouplingForce {
    let (Ok(theta), Ok((rot, fb))) = (
        heading_angle(sys, obstacle),
        steering_rotation(sys, obstacle, fallback),
    ) else {
        return CouplingForce::zero(true);
    };
    let theta_dot = params.gamma * theta * (-params.beta * theta.abs()).exp();
    CouplingForce {
        force: rot * sys.xdot * theta_dot,
        degenerate: fb,
    }
}

/// Magnitude factor of the dead-zone-free term, per unit speed.
pub fn avoidance_gain(theta: f64, d: f64, p: &AvoidanceParams) -> f64 {
    // sign(0) is taken as +1
    let sign = if theta < 0.0 { -1.0 } else { 1.0 };
    p.alpha * sign * (-theta * theta / (p.psi * p.psi)).exp() * (-p.kappa * d * d).exp()
}

/// Dead-zone-free avoidance term
/// `C = R xdot alpha sign(theta) exp(-theta^2/psi^2) exp(-kappa d^2)`.
pub fn coupling_oa(
    sys: &SystemKinematics,
    obstacle: &Vec3,
    d: f64,
    params: &AvoidanceParams,
    fallback: &FallbackAxes,
) -> Result<CouplingForce> {
    if !(d >= 0.0) {
        return invalid(format!("distance must be non-negative, got {d}"));
    }
    let (Ok(theta), Ok((rot, fb))) = (
        heading_angle(sys, obstacle),
        steering_rotation(sys, obstacle, fallback),
    ) else {
        return Ok(CouplingForce::zero(true));
    };
    Ok(CouplingForce {
        force: rot * sys.xdot * avoidance_gain(theta, d, params),
        degenerate: fb,
    })
}

/// Heading guidance term `C = R' xdot alpha theta_hat exp(1 + kappa d^2)`,
/// rotating the velocity towards the desired direction.
pub fn coupling_hg(
    sys: &SystemKinematics,
    target: &GuidanceTarget,
    d: f64,
    params: &AvoidanceParams,
    fallback: &FallbackAxes,
) -> Result<CouplingForce> {
    if !(d >= 0.0) {
        return invalid(format!("distance must be non-negative, got {d}"));
    }
    if !target.active {
        return Ok(CouplingForce::zero(false));
    }
    let speed = sys.xdot.norm();
    if speed <= MIN_SPEED {
        return Ok(CouplingForce::zero(true));
    }
    let theta_hat = angle_between(&sys.xdot, &target.xdot_d);
    let r = sys.xdot.cross(&target.xdot_d);
    let (axis, fb) = if r.norm() > 1e-9 * speed {
        (r, false)
    } else if theta_hat < FRAC_PI_2 {
        return Ok(CouplingForce::zero(false));
    } else {
        (fallback.axis_for(&sys.xdot), true)
    };
    let gain = params.alpha * theta_hat * (1.0 + params.kappa * d * d).exp();
    Ok(CouplingForce {
        force: quarter_turn(&axis) * sys.xdot * gain,
        degenerate: fb,
    })
}

/// One obstacle's contribution to the composed coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleTerm {
    pub point: Vec3,
    pub distance: f64,
    pub params: AvoidanceParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Guidance {
    pub target: GuidanceTarget,
    pub params: AvoidanceParams,
}

/// Sum of per-obstacle avoidance terms plus, for each obstacle, the
/// guidance term evaluated at that obstacle's distance.
pub fn compose(
    sys: &SystemKinematics,
    obstacles: &[ObstacleTerm],
    guidance: Option<&Guidance>,
    fallback: &FallbackAxes,
) -> Result<CouplingForce> {
    let mut total = CouplingForce::zero(false);
    for ob in obstacles {
        let oa = coupling_oa(sys, &ob.point, ob.distance, &ob.params, fallback)?;
        total.force += oa.force;
        total.degenerate |= oa.degenerate;
        if let Some(g) = guidance {
            let hg = coupling_hg(sys, &g.target, ob.distance, &g.params, fallback)?;
            total.force += hg.force;
            total.degenerate |= hg.degenerate;
        }
    }
    Ok(total)
}
