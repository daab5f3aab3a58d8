use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dmp::Vec3;
use crate::error::{invalid, Result};
use crate::geometry::{dilate_cloud, fit_superquadric, Ellipsoid, FitOptions, PointCloud};
use crate::route::WorkspaceModel;

/// Obstacle as written in scenario files. `orientation` is row-major with
/// the principal axes as columns; identity when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: Vec3,
    pub semi_axes: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[[f64; 3]; 3]>,
}

impl ObstacleSpec {
    pub fn to_ellipsoid(&self) -> Result<Ellipsoid> {
        let rot = match self.orientation {
            Some(r) => Matrix3::from_fn(|i, j| r[i][j]),
            None => Matrix3::identity(),
        };
        Ellipsoid::new(self.center, self.semi_axes, rot)
    }

    pub fn from_ellipsoid(e: &Ellipsoid) -> Self {
        let r = e.rotation;
        let orientation = if r == Matrix3::identity() {
            None
        } else {
            Some([0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]))
        };
        Self {
            center: e.center,
            semi_axes: e.semi_axes,
            orientation,
        }
    }
}

/// Scenario file layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub start: Vec3,
    pub goal: Vec3,
    pub obstacles: Vec<ObstacleSpec>,
    /// Desired clearance, m; `null` for the unconstrained model.
    #[serde(default)]
    pub clearance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<WorkspaceModel>,
    #[serde(default)]
    pub seed: u64,
    /// Half-extents of the system's bounding box; obstacles are dilated by
    /// it when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_extents: Option<Vec3>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub raw: Ellipsoid,
    /// Body grown by the system geometry; all metrics use this one.
    pub dilated: Ellipsoid,
}

impl Obstacle {
    /// Obstacle whose dilated body is already known.
    pub fn point_system(e: Ellipsoid) -> Self {
        Self { raw: e, dilated: e }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub start: Vec3,
    pub goal: Vec3,
    pub obstacles: Vec<Obstacle>,
    pub clearance: Option<f64>,
    pub workspace: Option<WorkspaceModel>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(start: Vec3, goal: Vec3, obstacles: Vec<Obstacle>, clearance: Option<f64>) -> Result<Self> {
        let sc = Self {
            start,
            goal,
            obstacles,
            clearance,
            workspace: None,
            seed: 0,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.iter().chain(self.goal.iter()).all(|v| v.is_finite())) {
            return invalid("start and goal must be finite");
        }
        if (self.goal - self.start).norm() <= 1e-9 {
            return invalid("start and goal coincide");
        }
        if let Some(c) = self.clearance {
            if !(c >= 0.0) || !c.is_finite() {
                return invalid(format!("clearance must be non-negative, got {c}"));
            }
        }
        if let Some(ws) = &self.workspace {
            ws.validate()?;
        }
        Ok(())
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        let extents = file.system_extents.unwrap_or_else(Vec3::zeros);
        let obstacles = file
            .obstacles
            .iter()
            .map(|o| {
                let raw = o.to_ellipsoid()?;
                Ok(Obstacle {
                    raw,
                    dilated: dilate_ellipsoid(&raw, extents)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sc = Self {
            start: file.start,
            goal: file.goal,
            obstacles,
            clearance: file.clearance,
            workspace: file.workspace,
            seed: file.seed,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// File form; obstacles are written as their dilated bodies.
    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            start: self.start,
            goal: self.goal,
            obstacles: self.obstacles.iter().map(|o| ObstacleSpec::from_ellipsoid(&o.dilated)).collect(),
            clearance: self.clearance,
            workspace: self.workspace,
            seed: self.seed,
            system_extents: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn dilated(&self) -> Vec<Ellipsoid> {
        self.obstacles.iter().map(|o| o.dilated).collect()
    }
}

/// `e` grown by a box of the given half-extents: the surface is sampled on
/// a Fibonacci lattice, dilated, and refitted. The result contains `e`.
pub fn dilate_ellipsoid(e: &Ellipsoid, half_extents: Vec3) -> Result<Ellipsoid> {
    if half_extents == Vec3::zeros() {
        return Ok(*e);
    }
    let n = 600;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let points = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let u = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            e.center + e.rotation * u.component_mul(&e.semi_axes)
        })
        .collect();
    let grown = dilate_cloud(&PointCloud::world(points), half_extents)?;
    fit_superquadric(&grown, &FitOptions::dilated())?.superquadric.to_ellipsoid()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "start": [0, 0, 0], "goal": [1, 0, 0],
            "obstacles": [{"center": [0.5, 0, 0], "semi_axes": [0.1, 0.2, 0.1]}],
            "clearance": 0.15, "seed": 7
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        assert_eq!(sc.clearance, Some(0.15));
        assert_eq!(sc.obstacles[0].dilated.semi_axes, Vec3::new(0.1, 0.2, 0.1));
        let again = Scenario::from_file(&sc.to_file()).unwrap();
        assert_eq!(again, sc);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let bad = r#"{"start": [0,0,0], "goal": [0,0,0], "obstacles": []}"#;
        assert!(Scenario::from_json(bad).is_err());
        let neg = r#"{"start": [0,0,0], "goal": [1,0,0], "obstacles": [{"center": [0,0,0], "semi_axes": [0.1,-0.1,0.1]}]}"#;
        assert!(Scenario::from_json(neg).is_err());
    }

    #[test]
    fn dilation_grows_body() {
        let e = Ellipsoid::axis_aligned(Vec3::zeros(), Vec3::new(0.1, 0.08, 0.05)).unwrap();
        let d = dilate_ellipsoid(&e, Vec3::repeat(0.02)).unwrap();
        let mut a: Vec<f64> = d.semi_axes.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        assert!(a[0] > 0.05 && a[2] > 0.1);
    }
}
