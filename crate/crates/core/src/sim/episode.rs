use std::io::Write;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::coupling::{
    compose, heading_angle, AvoidanceParams, FallbackAxes, Guidance, GuidanceTarget, ObstacleTerm, SystemKinematics,
};
use crate::dmp::{scale_duration, DmpGains, DmpState, LocalFrame, Vec3, PHASE_END};
use crate::error::{invalid, Error, Result};
use crate::geometry::{extreme_point, polyline_length, section_plane, EllipseSection, Plane};
use crate::route::{build_cost_ring, direction_to_guidance, ring_direction, select_direction};

/// Source of avoidance parameters for a descriptor and clearance target.
pub trait CouplingPolicy: Sync {
    fn params(&self, lambda_p: (f64, f64), clearance: Option<f64>) -> Result<AvoidanceParams>;

    /// Whether `params` depends on the descriptor; when false the episode
    /// skips sectioning.
    fn uses_descriptor(&self) -> bool {
        true
    }
}

/// The same parameters everywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedParams(pub AvoidanceParams);

impl CouplingPolicy for FixedParams {
    fn params(&self, _: (f64, f64), _: Option<f64>) -> Result<AvoidanceParams> {
        Ok(self.0)
    }

    fn uses_descriptor(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub alpha: f64,
    /// Keep small: the guidance envelope grows as `exp(1 + kappa d^2)`.
    pub kappa: f64,
    /// Angle between the desired heading and the chord axis, rad.
    pub blend: f64,
    pub n_dirs: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            alpha: 20.0,
            kappa: 1.0,
            blend: std::f64::consts::FRAC_PI_4,
            n_dirs: crate::route::DEFAULT_DIRECTIONS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub scale_tau: bool,
    pub guided: bool,
    /// Keep the full state history in the returned trajectory.
    pub record: bool,
    pub dt: f64,
    /// Nominal duration before any scaling, s.
    pub tau: f64,
    pub gains: DmpGains,
    /// Time run after the phase ends, as a fraction of tau.
    pub settle: f64,
    pub guidance: GuidanceConfig,
    /// Re-section an obstacle once its plane normal has turned this far, deg.
    pub resection_deg: f64,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            scale_tau: true,
            guided: false,
            record: false,
            dt: 1e-3,
            tau: 1.0,
            gains: DmpGains::default(),
            settle: 0.5,
            guidance: GuidanceConfig::default(),
            resection_deg: 0.5,
        }
    }
}

impl EpisodeOptions {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        if !(self.dt > 0.0 && self.tau > 0.0 && self.settle >= 0.0 && self.resection_deg >= 0.0) {
            return invalid("episode options need dt > 0, tau > 0, settle >= 0, resection_deg >= 0");
        }
        if !(self.guidance.alpha >= 0.0 && self.guidance.kappa >= 0.0) {
            return invalid("guidance gains must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDescriptor {
    pub lambda_p: (f64, f64),
    pub distance: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub tau: f64,
    pub omega_d: Option<f64>,
    pub guidance_active: Vec<bool>,
    /// Descriptor of the nearest obstacle at each step, when one was used.
    pub descriptors: Vec<Option<StepDescriptor>>,
}

impl Trajectory {
    /// `t x y z` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# t x y z")?;
        for (t, p) in self.times.iter().zip(&self.positions) {
            writeln!(w, "{t} {} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub collided: bool,
    /// Smallest distance to any dilated obstacle surface; infinite without
    /// obstacles.
    pub clearance: f64,
    pub convergence: f64,
    pub tau: f64,
}

struct SectionCache {
    normal: Vec3,
    lambda_p: (f64, f64),
    params: AvoidanceParams,
}

/// Normal of the steering plane through the system: spanned by the
/// direction to `center` and the velocity, or by the velocity and the
/// fallback directions when those are parallel.
fn steering_normal(x: &Vec3, v: &Vec3, center: &Vec3, fb: &FallbackAxes) -> Vec3 {
    let rel = center - x;
    let n = rel.cross(v);
    if n.norm() > 1e-9 * rel.norm() * v.norm() {
        return n.normalize();
    }
    let a = v.cross(&fb.up);
    if a.norm() > 1e-9 * v.norm() {
        return a.normalize();
    }
    v.cross(&fb.side).normalize()
}

/// Descriptor of a section: half-width along the chord direction as seen
/// in the plane, then the in-plane half-width across it.
fn descriptor(sec: &EllipseSection, axis: &Vec3, v: &Vec3) -> (f64, f64) {
    let along = sec
        .plane
        .project_dir(axis)
        .try_normalize(1e-9)
        .or_else(|| sec.plane.project_dir(v).try_normalize(1e-12))
        .unwrap_or(sec.axes[0]);
    let across = sec.plane.normal.cross(&along);
    (sec.half_width(&along), sec.half_width(&across))
}

/// Path length through the obstacles' extreme points. `side` forces the
/// passing side; otherwise each obstacle is passed away from its centre.
/// Obstacles whose section does not reach the chord are skipped.
fn estimated_length(sc: &Scenario, frame: &LocalFrame, side: Option<Vec3>) -> Result<f64> {
    let axis = frame.x_axis();
    let mut pts = Vec::new();
    for o in &sc.obstacles {
        let c = o.dilated.center;
        let offset = (c - sc.start) - axis * axis.dot(&(c - sc.start));
        let lateral = match side {
            Some(w) => w,
            None if offset.norm() > 1e-9 => offset,
            None => frame.z_axis(),
        };
        let sec = section_plane(&o.dilated, &Plane::spanned(c, &axis, &lateral)?)?;
        let (p, s) = match side {
            Some(w) => (sec.support(&w), w),
            None => {
                let p = extreme_point(&sec, &sc.start, &sc.goal, &frame.z_axis())?;
                let s = (p - c) - axis * axis.dot(&(p - c));
                (p, s)
            }
        };
        let lateral_reach = s.normalize().dot(&(p - sc.start));
        if lateral_reach > 0.0 {
            pts.push(p);
        }
    }
    pts.sort_by(|a, b| axis.dot(&(a - sc.start)).total_cmp(&axis.dot(&(b - sc.start))));
    let mut seq = vec![sc.start];
    seq.extend(pts);
    seq.push(sc.goal);
    Ok(polyline_length(&seq))
}

/// Integrate one episode of the unforced (straight-line) policy from start
/// to goal under the composed coupling.
pub fn run_episode(sc: &Scenario, policy: &dyn CouplingPolicy, opts: &EpisodeOptions) -> Result<(Trajectory, Metrics)> {
    sc.validate()?;
    opts.validate()?;
    let frame = LocalFrame::from_start_goal(sc.start, sc.goal)?;
    let axis = frame.x_axis();
    let fallback = FallbackAxes {
        up: frame.z_axis(),
        side: frame.y_axis(),
    };
    let obstacles = sc.dilated();

    let mut omega_d = None;
    let mut guidance = None;
    if opts.guided && !obstacles.is_empty() {
        let ring = build_cost_ring(
            &sc.start,
            &sc.goal,
            &obstacles,
            sc.clearance.unwrap_or(0.0),
            sc.workspace.as_ref(),
            opts.guidance.n_dirs,
        )?;
        let w = select_direction(&ring)?;
        omega_d = Some(w);
        guidance = Some(Guidance {
            target: direction_to_guidance(w, &frame, opts.guidance.blend)?,
            params: AvoidanceParams {
                alpha: opts.guidance.alpha,
                psi: 1.0,
                kappa: opts.guidance.kappa,
            },
        });
    }
    // guidance stays on until progress along the chord passes the last centre
    let guide_until = obstacles
        .iter()
        .map(|o| axis.dot(&(o.center - sc.start)))
        .fold(f64::NEG_INFINITY, f64::max);

    let nominal = (sc.goal - sc.start).norm();
    let tau = if opts.scale_tau && !obstacles.is_empty() {
        let side = omega_d.map(|w| ring_direction(&frame, w));
        scale_duration(opts.tau, nominal, estimated_length(sc, &frame, side)?)?
    } else {
        opts.tau
    };

    let mut state = DmpState::at_rest(sc.start, sc.goal, &opts.gains, tau)?;
    let mut traj = Trajectory {
        tau,
        omega_d,
        ..Trajectory::default()
    };
    let mut caches: Vec<Option<SectionCache>> = obstacles.iter().map(|_| None).collect();
    let cos_tol = opts.resection_deg.to_radians().cos();
    let mut terms = Vec::with_capacity(obstacles.len());
    let mut collided = false;
    let mut clearance = f64::INFINITY;
    let mut t = 0.0;
    let mut settle_steps: Option<usize> = None;

    loop {
        let x = state.position();
        let v = state.velocity();
        if !x.iter().chain(v.iter()).all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!("episode state at t = {t}: x = {x:?}, v = {v:?}")));
        }
        terms.clear();
        let mut nearest: Option<(f64, StepDescriptor)> = None;
        let moving = v.norm() > 1e-9;
        for (ob, cache) in obstacles.iter().zip(caches.iter_mut()) {
            let d = ob.distance(&x);
            if ob.inside_value(&x) <= 1.0 {
                collided = true;
            }
            clearance = clearance.min(d);
            if !moving {
                continue;
            }
            let params = if policy.uses_descriptor() {
                let n = steering_normal(&x, &v, &ob.center, &fallback);
                let stale = cache.as_ref().is_none_or(|c| c.normal.dot(&n).abs() < cos_tol);
                if stale {
                    let sec = section_plane(ob, &Plane::new(x, n)?)?;
                    let lambda_p = descriptor(&sec, &axis, &v);
                    *cache = Some(SectionCache {
                        normal: n,
                        lambda_p,
                        params: policy.params(lambda_p, sc.clearance)?,
                    });
                }
                let c = cache.as_ref().expect("cache filled above");
                if opts.record && nearest.as_ref().is_none_or(|(nd, _)| d < *nd) {
                    let sys = SystemKinematics { x, xdot: v };
                    let theta = heading_angle(&sys, &ob.center).unwrap_or(0.0);
                    nearest = Some((
                        d,
                        StepDescriptor {
                            lambda_p: c.lambda_p,
                            distance: d,
                            theta,
                        },
                    ));
                }
                c.params
            } else {
                policy.params((0.0, 0.0), sc.clearance)?
            };
            terms.push(ObstacleTerm {
                point: ob.center,
                distance: d,
                params,
            });
        }
        let active = guidance.is_some() && axis.dot(&(x - sc.start)) < guide_until;
        if opts.record {
            traj.times.push(t);
            traj.positions.push(x);
            traj.velocities.push(v);
            traj.guidance_active.push(active);
            traj.descriptors.push(nearest.map(|(_, s)| s));
        }

        match settle_steps {
            Some(0) => break,
            Some(ref mut n) => *n -= 1,
            None if state.phase.k < PHASE_END => {
                let n = (opts.settle * tau / opts.dt).round() as usize;
                if n == 0 {
                    break;
                }
                settle_steps = Some(n - 1);
            }
            None => {}
        }

        let g = guidance.map(|g| Guidance {
            target: GuidanceTarget { active, ..g.target },
            ..g
        });
        let coupling = if moving {
            compose(&SystemKinematics { x, xdot: v }, &terms, g.as_ref(), &fallback)?.force
        } else {
            Vec3::zeros()
        };
        state = state.step(None, coupling, opts.dt)?;
        t += opts.dt;
    }

    let metrics = Metrics {
        collided,
        clearance,
        convergence: (state.position() - sc.goal).norm(),
        tau,
    };
    Ok((traj, metrics))
}
