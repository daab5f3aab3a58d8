//! Discrete dynamic movement primitives: a shared canonical (phase) system
//! driving one second-order transformation system per degree of freedom.
//!
//! ```text
//! tau * z' = alpha_x * (beta_x * (g - x) - z) + f(k) + C
//! tau * x' = z
//! tau * k' = -alpha_k * k
//! ```
//!
//! All integration is explicit Euler.

use std::io::BufRead;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vec3 = Vector3<f64>;

/// Phase value at which the canonical system is considered finished.
pub const PHASE_END: f64 = 0.01;

/// Gain constants shared by all transformation systems of a primitive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmpGains {
    pub alpha_x: f64,
    pub beta_x: f64,
    pub alpha_k: f64,
}

impl Default for DmpGains {
    fn default() -> Self {
        // critically damped; k(tau) = PHASE_END
        Self {
            alpha_x: 25.0,
            beta_x: 25.0 / 4.0,
            alpha_k: (1.0 / PHASE_END).ln(),
        }
    }
}

impl DmpGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_x > 0.0 && self.beta_x > 0.0 && self.alpha_k > 0.0) {
            return invalid(format!("DMP gains must be positive: {self:?}"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState {
    pub k: f64,
    pub alpha_k: f64,
    pub tau: f64,
}

impl PhaseState {
    pub fn new(alpha_k: f64, tau: f64) -> Result<Self> {
        if !(alpha_k > 0.0) || !(tau > 0.0) {
            return invalid("phase needs alpha_k > 0 and tau > 0");
        }
        Ok(Self { k: 1.0, alpha_k, tau })
    }

    /// Closed-form phase after `t` seconds, starting from k = 1.
    pub fn exact(alpha_k: f64, tau: f64, t: f64) -> f64 {
        (-alpha_k * t / tau).exp()
    }

    /// One Euler step of `tau k' = -alpha_k k`.
    ///
    /// Steps with `dt >= tau / alpha_k` would drive the phase non-positive
    /// and are rejected.
    pub fn step(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid(format!("phase step needs dt > 0, got {dt}"));
        }
        if !(self.k > 0.0 && self.k <= 1.0) {
            return invalid(format!("phase out of (0, 1]: {}", self.k));
        }
        let rate = self.alpha_k * dt / self.tau;
        if rate >= 1.0 {
            return invalid(format!(
                "dt = {dt} too large for alpha_k = {}, tau = {}",
                self.alpha_k, self.tau
            ));
        }
        Ok(Self {
            k: self.k * (1.0 - rate),
            ..*self
        })
    }
}

/// State of one degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformState {
    pub x: f64,
    /// Scaled velocity, `tau * x'`.
    pub z: f64,
    pub goal: f64,
    pub alpha_x: f64,
    pub beta_x: f64,
}

impl TransformState {
    pub fn at_rest(x: f64, goal: f64, gains: &DmpGains) -> Self {
        Self {
            x,
            z: 0.0,
            goal,
            alpha_x: gains.alpha_x,
            beta_x: gains.beta_x,
        }
    }

    /// One explicit step with forcing `force` and coupling `coupling`.
    pub fn step(&self, force: f64, coupling: f64, dt: f64, tau: f64) -> Result<Self> {
        if !(dt > 0.0) || !(tau > 0.0) {
            return invalid(format!("transform step needs dt > 0 and tau > 0 (dt={dt}, tau={tau})"));
        }
        if !(force.is_finite() && coupling.is_finite() && self.x.is_finite() && self.z.is_finite())
        {
            return Err(Error::NonFinite(format!(
                "transform step: x={}, z={}, f={force}, C={coupling}",
                self.x, self.z
            )));
        }
        let zdot = (self.alpha_x * (self.beta_x * (self.goal - self.x) - self.z) + force + coupling)
            / tau;
        Ok(Self {
            x: self.x + dt * self.z / tau,
            z: self.z + dt * zdot,
            ..*self
        })
    }
}

/// Normalised radial-basis forcing term, `f(k) = k * sum(w psi) / sum(psi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub weights: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingValue {
    pub value: f64,
    /// All basis activations underflowed; `value` is reported as 0.
    pub degenerate: bool,
}

impl ForcingTerm {
    pub fn new(weights: Vec<f64>, centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("forcing term needs at least one basis function");
        }
        if weights.len() != centers.len() || weights.len() != widths.len() {
            return invalid("forcing term weights/centers/widths lengths differ");
        }
        if widths.iter().any(|h| !(*h > 0.0)) {
            return invalid("forcing term widths must be positive");
        }
        Ok(Self {
            weights,
            centers,
            widths,
        })
    }

    /// Zero-weight basis with centers spaced uniformly in time over one
    /// phase run, i.e. exponentially in phase.
    pub fn zeros(n_basis: usize, alpha_k: f64) -> Result<Self> {
        if n_basis == 0 {
            return invalid("forcing term needs at least one basis function");
        }
        let centers: Vec<f64> = if n_basis == 1 {
            vec![(-0.5 * alpha_k).exp()]
        } else {
            (0..n_basis)
                .map(|i| (-alpha_k * i as f64 / (n_basis - 1) as f64).exp())
                .collect()
        };
        let widths = (0..n_basis)
            .map(|i| {
                if n_basis == 1 {
                    1.0
                } else {
                    let j = if i + 1 < n_basis { i } else { i - 1 };
                    1.0 / (centers[j + 1] - centers[j]).powi(2)
                }
            })
            .collect();
        Self::new(vec![0.0; n_basis], centers, widths)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn activation(&self, i: usize, k: f64) -> f64 {
        (-self.widths[i] * (k - self.centers[i]).powi(2)).exp()
    }

    pub fn evaluate(&self, k: f64) -> ForcingValue {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.len() {
            let psi = self.activation(i, k);
            num += self.weights[i] * psi;
            den += psi;
        }
        if den < 1e-300 {
            return ForcingValue {
                value: 0.0,
                degenerate: true,
            };
        }
        ForcingValue {
            value: num / den * k,
            degenerate: false,
        }
    }

    pub fn eval(&self, k: f64) -> f64 {
        self.evaluate(k).value
    }
}

/// Sampled demonstration of a single degree of freedom.
#[derive(Clone, Debug)]
pub struct Demo1 <'a> {
    pub times: &'a [f64],
    pub positions: &'a [f64],
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 3 {
        return invalid(format!("demonstration needs >= 3 samples, got {}", times.len()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("demonstration timestamps must be strictly increasing (duplicate or unordered)");
    }
    Ok(())
}

/// First and second derivatives by (non-uniform) finite differences.
fn derivatives(times: &[f64], xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let diff = |v: &[f64], i: usize| -> f64 {
        if i == 0 {
            (v[1] - v[0]) / (times[1] - times[0])
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / (times[n - 1] - times[n - 2])
        } else {
            let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
            // second-order accurate on non-uniform grids
            (h0 * h0 * v[i + 1] - h1 * h1 * v[i - 1] + (h1 * h1 - h0 * h0) * v[i])
                / (h0 * h1 * (h0 + h1))
        }
    };
    let vel: Vec<f64> = (0..n).map(|i| diff(xs, i)).collect();
    let acc: Vec<f64> = (0..n).map(|i| diff(&vel, i)).collect();
    (vel, acc)
}

/// Fit the forcing term of one degree of freedom to a demonstration by
/// locally weighted regression of the target forcing profile.
///
/// `tau` is taken as the demonstration duration.
pub fn fit_forcing(demo: &Demo1<'_>, goal: f64, n_basis: usize, gains: &DmpGains) -> Result<ForcingTerm> {
    check_times(demo.times)?;
    if demo.times.len() != demo.positions.len() {
        return invalid("demonstration times/positions lengths differ");
    }
    gains.validate()?;
    let t0 = demo.times[0];
    let tau = demo.times[demo.times.len() - 1] - t0;
    let (vel, acc) = derivatives(demo.times, demo.positions);

    let mut term = ForcingTerm::zeros(n_basis, gains.alpha_k)?;
    let phases: Vec<f64> = demo
        .times
        .iter()
        .map(|t| PhaseState::exact(gains.alpha_k, tau, t - t0))
        .collect();
    let targets: Vec<f64> = (0..phases.len())
        .map(|j| {
            let z = tau * vel[j];
            tau * tau * acc[j] - gains.alpha_x * (gains.beta_x * (goal - demo.positions[j]) - z)
        })
        .collect();
    for i in 0..n_basis {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, f) in phases.iter().zip(&targets) {
            let psi = term.activation(i, *k);
            num += psi * k * f;
            den += psi * k * k;
        }
        term.weights[i] = if den > 1e-300 { num / den } else { 0.0 };
    }
    Ok(term)
}

/// Three independent transformation systems sharing one canonical system.
#[derive(Clone, Debug, PartialEq)]
pub struct DmpState {
    pub phase: PhaseState,
    pub dofs: [TransformState; 3],
}

impl DmpState {
    pub fn at_rest(start: Vec3, goal: Vec3, gains: &DmpGains, tau: f64) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            phase: PhaseState::new(gains.alpha_k, tau)?,
            dofs: [0, 1, 2].map(|i| TransformState::at_rest(start[i], goal[i], gains)),
        })
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.dofs[0].x, self.dofs[1].x, self.dofs[2].x)
    }

    /// Velocity in m/s, `z / tau`.
    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.dofs[0].z, self.dofs[1].z, self.dofs[2].z) / self.phase.tau
    }

    pub fn goal(&self) -> Vec3 {
        Vec3::new(self.dofs[0].goal, self.dofs[1].goal, self.dofs[2].goal)
    }

    pub fn step(&self, forcing: Option<&[ForcingTerm; 3]>, coupling: Vec3, dt: f64) -> Result<Self> {
        let tau = self.phase.tau;
        let k = self.phase.k;
        let mut dofs = self.dofs;
        for (i, dof) in dofs.iter_mut().enumerate() {
            let f = forcing.map_or(0.0, |f| f[i].eval(k));
            *dof = dof.step(f, coupling[i], dt, tau)?;
        }
        Ok(Self {
            phase: self.phase.step(dt)?,
            dofs,
        })
    }
}

/// Sampled 3-D demonstration trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Demo {
    pub times: Vec<f64>,
    pub positions: Vec<Vec3>,
}

impl Demo {
    /// Parse a whitespace-separated `t x y z` table. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut positions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| Error::Parse {
                path: name.to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: i + 1,
                    msg: format!("expected 4 columns (t x y z), got {}", vals.len()),
                });
            }
            times.push(vals[0]);
            positions.push(Vec3::new(vals[1], vals[2], vals[3]));
        }
        Ok(Self { times, positions })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn duration(&self) -> f64 {
        self.times.last().unwrap_or(&0.0) - self.times.first().unwrap_or(&0.0)
    }

    /// Fit one forcing term per axis, using the last sample as goal.
    pub fn fit(&self, n_basis: usize, gains: &DmpGains) -> Result<[ForcingTerm; 3]> {
        check_times(&self.times)?;
        let goal = *self.positions.last().expect("checked non-empty");
        let mut terms = Vec::with_capacity(3);
        for axis in 0..3 {
            let xs: Vec<f64> = self.positions.iter().map(|p| p[axis]).collect();
            let demo = Demo1 {
                times: &self.times,
                positions: &xs,
            };
            terms.push(fit_forcing(&demo, goal[axis], n_basis, gains)?);
        }
        Ok(terms.try_into().expect("three axes"))
    }
}

/// Integrate a (possibly forced) primitive without coupling, sampling
/// every step. Returns `(time, position)` pairs including t = 0.
pub fn rollout(
    start: Vec3,
    goal: Vec3,
    forcing: Option<&[ForcingTerm; 3]>,
    gains: &DmpGains,
    tau: f64,
    dt: f64,
    duration: f64,
) -> Result<Vec<(f64, Vec3)>> {
    let mut state = DmpState::at_rest(start, goal, gains, tau)?;
    let steps = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, start));
    for i in 1..=steps {
        state = state.step(forcing, Vec3::zeros(), dt)?;
        out.push((i as f64 * dt, state.position()));
    }
    Ok(out)
}

/// Task frame: x from start to goal, z as close to world-up as possible,
/// y completing a right-handed triad.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    /// Columns are the local x, y, z axes in world coordinates.
    pub rotation: Matrix3<f64>,
}

impl LocalFrame {
    pub fn from_start_goal(start: Vec3, goal: Vec3) -> Result<Self> {
        let chord = goal - start;
        let len = chord.norm();
        if !(len > 1e-12) || !len.is_finite() {
            return Err(Error::DegenerateGeometry(
                "local frame needs start != goal".into(),
            ));
        }
        let x = chord / len;
        let mut up = Vec3::z() - x * x.z;
        if up.norm() < 1e-9 {
            // chord is vertical; fall back to the world x direction
            up = Vec3::x() - x * x.x;
        }
        let z = up.normalize();
        let y = z.cross(&x);
        Ok(Self {
            origin: start,
            rotation: Matrix3::from_columns(&[x, y, z]),
        })
    }

    pub fn x_axis(&self) -> Vec3 {
        self.rotation.column(0).into()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.origin)
    }

    pub fn from_local(&self, q: &Vec3) -> Vec3 {
        self.origin + self.rotation * q
    }
}

/// Stretch the primitive duration by the ratio of estimated to nominal path
/// length.
pub fn scale_duration(tau_nominal: f64, nominal_len: f64, estimated_len: f64) -> Result<f64> {
    if !(nominal_len > 0.0) || !(estimated_len > 0.0) {
        return invalid(format!(
            "path lengths must be positive (nominal={nominal_len}, estimated={estimated_len})"
        ));
    }
    if !(tau_nominal > 0.0) {
        return invalid("tau must be positive");
    }
    Ok(tau_nominal * estimated_len / nominal_len)
}
