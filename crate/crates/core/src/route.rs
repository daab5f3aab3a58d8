//! Route selection over a ring of lateral directions around the chord.
//!
//! Each direction `omega` in the local YZ-plane (`omega = 0` along local y,
//! `pi/2` along local z) proposes passing every obstacle on that side. A
//! proposal costs 1 if it would put the system below the table, 1 if it
//! leaves the workspace sphere, plus its polyline length min-max normalised
//! over the ring.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::coupling::GuidanceTarget;
use crate::dmp::{LocalFrame, Vec3};
use crate::error::{invalid, Error, Result};
use crate::geometry::{polyline_length, Ellipsoid};

pub const DEFAULT_DIRECTIONS: usize = 72;
pub const MIN_DIRECTIONS: usize = 4;
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceModel {
    /// World z of the table top; points below it collide with the table.
    #[serde(default)]
    pub table_height: Option<f64>,
    pub center: Vec3,
    pub radius: f64,
}

impl WorkspaceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return invalid(format!("workspace radius must be positive, got {}", self.radius));
        }
        Ok(())
    }

    pub fn below_table(&self, p: &Vec3) -> bool {
        self.table_height.is_some_and(|h| p.z < h)
    }

    pub fn outside(&self, p: &Vec3) -> bool {
        (p - self.center).norm() > self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostRing {
    pub omegas: Vec<f64>,
    pub table: Vec<f64>,
    pub length: Vec<f64>,
    pub limits: Vec<f64>,
    pub total: Vec<f64>,
    /// Raw polyline length of each proposal, m.
    pub raw_length: Vec<f64>,
}

impl CostRing {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn feasible(&self, i: usize) -> bool {
        self.table[i] == 0.0 && self.limits[i] == 0.0
    }

    pub fn min_total(&self) -> f64 {
        self.total.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Unit lateral direction for `omega` in the frame's YZ-plane.
pub fn ring_direction(frame: &LocalFrame, omega: f64) -> Vec3 {
    frame.y_axis() * omega.cos() + frame.z_axis() * omega.sin()
}

/// Point where a route on side `w` passes an obstacle: the body's support
/// point along `w`, pushed out by the clearance.
pub fn passing_point(obstacle: &Ellipsoid, w: &Vec3, clearance: f64) -> Vec3 {
    obstacle.support(w) + w * clearance
}

pub fn build_cost_ring(
    start: &Vec3,
    goal: &Vec3,
    obstacles: &[Ellipsoid],
    clearance: f64,
    ws: Option<&WorkspaceModel>,
    n_dirs: usize,
) -> Result<CostRing> {
    if obstacles.is_empty() {
        return invalid("cost ring needs at least one obstacle");
    }
    if n_dirs < MIN_DIRECTIONS {
        return invalid(format!("cost ring needs at least {MIN_DIRECTIONS} directions, got {n_dirs}"));
    }
    if !(clearance >= 0.0) {
        return invalid(format!("clearance must be non-negative, got {clearance}"));
    }
    if let Some(ws) = ws {
        ws.validate()?;
    }
    let frame = LocalFrame::from_start_goal(*start, *goal)?;
    let axis = frame.x_axis();
    let n = n_dirs;
    let mut ring = CostRing {
        omegas: (0..n).map(|i| TAU * i as f64 / n as f64).collect(),
        table: vec![0.0; n],
        length: vec![0.0; n],
        limits: vec![0.0; n],
        total: vec![0.0; n],
        raw_length: vec![0.0; n],
    };
    for i in 0..n {
        let w = ring_direction(&frame, ring.omegas[i]);
        let mut pts: Vec<Vec3> = obstacles.iter().map(|o| passing_point(o, &w, clearance)).collect();
        pts.sort_by(|a, b| axis.dot(&(a - start)).total_cmp(&axis.dot(&(b - start))));
        if let Some(ws) = ws {
            ring.table[i] = if pts.iter().any(|p| ws.below_table(p)) { 1.0 } else { 0.0 };
            ring.limits[i] = if pts.iter().any(|p| ws.outside(p)) { 1.0 } else { 0.0 };
        }
        let mut seq = Vec::with_capacity(pts.len() + 2);
        seq.push(*start);
        seq.extend(pts);
        seq.push(*goal);
        ring.raw_length[i] = polyline_length(&seq);
    }
    let lo = ring.raw_length.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ring.raw_length.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..n {
        // lengths equal up to rounding count as a tie
        ring.length[i] = if hi - lo > TIE_TOL * hi { (ring.raw_length[i] - lo) / (hi - lo) } else { 0.0 };
        ring.total[i] = ring.table[i] + ring.length[i] + ring.limits[i];
    }
    if !(0..n).any(|i| ring.feasible(i)) {
        return Err(Error::Infeasible);
    }
    Ok(ring)
}

/// Feasible direction of least total cost; the smallest angle wins ties
/// within 1e-12.
pub fn select_direction(ring: &CostRing) -> Result<f64> {
    let mut best: Option<usize> = None;
    for i in 0..ring.len() {
        if !ring.feasible(i) {
            continue;
        }
        if best.is_none_or(|b| ring.total[i] < ring.total[b] - TIE_TOL) {
            best = Some(i);
        }
    }
    best.map(|i| ring.omegas[i]).ok_or(Error::Infeasible)
}

/// Desired heading leaning from the chord axis towards `omega_d` by the
/// blend angle `blend` (0 keeps the chord axis, pi/2 is purely lateral).
pub fn direction_to_guidance(omega_d: f64, frame: &LocalFrame, blend: f64) -> Result<GuidanceTarget> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&blend) {
        return invalid(format!("guidance blend must be in [0, pi/2], got {blend}"));
    }
    let dir = frame.x_axis() * blend.cos() + ring_direction(frame, omega_d) * blend.sin();
    GuidanceTarget::new(dir, true)
}
