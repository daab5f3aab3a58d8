use nalgebra::{DVector, Matrix3, Rotation3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use super::ellipsoid::Ellipsoid;
use crate::dmp::Vec3;
use crate::error::{invalid, Error, Result};
use crate::optim::{self, LeastSquares, LmConfig};

pub const MIN_SEMI_AXIS: f64 = 1e-3;
pub const SHAPE_RANGE: (f64, f64) = (0.1, 2.0);

/// Superquadric `F(x,y,z) = ((x/l1)^(2/l5) + (y/l2)^(2/l5))^(l5/l4) + (z/l3)^(2/l4)`
/// placed at `center` with principal axes given by the columns of
/// `orientation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superquadric {
    pub lambda: [f64; 5],
    pub center: Vec3,
    pub orientation: Matrix3<f64>,
}

impl Superquadric {
    pub fn ellipsoid(semi_axes: Vec3, center: Vec3, orientation: Matrix3<f64>) -> Self {
        Self {
            lambda: [semi_axes.x, semi_axes.y, semi_axes.z, 1.0, 1.0],
            center,
            orientation,
        }
    }

    pub fn semi_axes(&self) -> Vec3 {
        Vec3::new(self.lambda[0], self.lambda[1], self.lambda[2])
    }

    pub fn is_ellipsoid(&self) -> bool {
        self.lambda[3] == 1.0 && self.lambda[4] == 1.0
    }

    /// Inside-outside value of a world-frame point.
    pub fn eval_f(&self, p: &Vec3) -> f64 {
        let q = self.orientation.transpose() * (p - self.center);
        eval_local(&self.lambda, &q)
    }

    pub fn to_ellipsoid(&self) -> Result<Ellipsoid> {
        if !self.is_ellipsoid() {
            return invalid("superquadric shape exponents are not 1");
        }
        Ellipsoid::new(self.center, self.semi_axes(), self.orientation)
    }
}

fn eval_local(l: &[f64; 5], q: &Vec3) -> f64 {
    let (e4, e5) = (l[3], l[4]);
    let xy = (q.x / l[0]).abs().powf(2.0 / e5) + (q.y / l[1]).abs().powf(2.0 / e5);
    xy.powf(e5 / e4) + (q.z / l[2]).abs().powf(2.0 / e4)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Hold both shape exponents at 1.
    pub fix_ellipsoid: bool,
    /// After fitting, grow the semi-axes uniformly until this fraction of
    /// the points satisfies F <= 1. `None` keeps the least-squares fit.
    pub enclose: Option<f64>,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fix_ellipsoid: false,
            enclose: None,
            max_iter: 200,
        }
    }
}

impl FitOptions {
    pub fn ellipsoid() -> Self {
        Self {
            fix_ellipsoid: true,
            ..Self::default()
        }
    }

    /// Ellipsoid fit for clouds grown by [`dilate_cloud`]: the least-squares
    /// surface of a dilated shell sits near its inner copies, so the result
    /// is grown until 80% of the points are enclosed.
    ///
    /// [`dilate_cloud`]: super::dilate_cloud
    pub fn dilated() -> Self {
        Self {
            enclose: Some(0.8),
            ..Self::ellipsoid()
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub superquadric: Superquadric,
    /// Sum of squared volume-weighted residuals at the returned parameters
    /// (before any enclosing growth).
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    /// Optimizer stopped on its iteration or damping budget.
    pub warning: bool,
    /// Uniform growth applied by the enclosing step (1 when disabled).
    pub enclose_scale: f64,
}

struct SqProblem<'a> {
    points: &'a [Vec3],
    base_rotation: Matrix3<f64>,
    fix_ellipsoid: bool,
}

impl SqProblem<'_> {
    fn unpack(&self, p: &DVector<f64>) -> Superquadric {
        let (shape, off) = if self.fix_ellipsoid {
            ([1.0, 1.0], 3)
        } else {
            ([p[3], p[4]], 5)
        };
        let rot = Rotation3::new(Vec3::new(p[off + 3], p[off + 4], p[off + 5]));
        Superquadric {
            lambda: [p[0], p[1], p[2], shape[0], shape[1]],
            center: Vec3::new(p[off], p[off + 1], p[off + 2]),
            orientation: self.base_rotation * rot.into_inner(),
        }
    }
}

impl LeastSquares for SqProblem<'_> {
    fn n_params(&self) -> usize {
        if self.fix_ellipsoid {
            9
        } else {
            11
        }
    }

    fn n_residuals(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, p: &DVector<f64>, out: &mut DVector<f64>) {
        let sq = self.unpack(p);
        let w = (sq.lambda[0] * sq.lambda[1] * sq.lambda[2]).sqrt();
        for (o, pt) in out.iter_mut().zip(self.points) {
            *o = w * (sq.eval_f(pt) - 1.0);
        }
    }

    fn project(&self, p: &mut DVector<f64>) {
        for i in 0..3 {
            p[i] = p[i].max(MIN_SEMI_AXIS);
        }
        if !self.fix_ellipsoid {
            for i in 3..5 {
                p[i] = p[i].clamp(SHAPE_RANGE.0, SHAPE_RANGE.1);
            }
        }
    }
}

/// Principal axes of a point set: centroid, right-handed eigenvector basis
/// sorted by decreasing variance, and per-axis standard deviations.
fn principal_axes(points: &[Vec3]) -> Result<(Vec3, Matrix3<f64>, Vec3)> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = Vec3::new(
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(vals.z > 1e-12 * vals.x.max(1e-300)) || !(vals.x > 0.0) {
        return Err(Error::DegenerateGeometry(
            "point cloud is coplanar or degenerate".into(),
        ));
    }
    let mut rot = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if rot.determinant() < 0.0 {
        rot.set_column(2, &(-rot.column(2)));
    }
    Ok((centroid, rot, vals.map(f64::sqrt)))
}

/// Recover a superquadric from surface samples by minimising
/// `sum (sqrt(l1 l2 l3) (F(p_i) - 1))^2`.
pub fn fit_superquadric(cloud: &PointCloud, opts: &FitOptions) -> Result<FitResult> {
    if cloud.points.len() < 4 {
        return invalid(format!("need at least 4 points to fit, got {}", cloud.points.len()));
    }
    if cloud.points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("point cloud".into()));
    }
    let (centroid, base_rotation, std) = principal_axes(&cloud.points)?;
    let problem = SqProblem {
        points: &cloud.points,
        base_rotation,
        fix_ellipsoid: opts.fix_ellipsoid,
    };
    let mut p0 = vec![1.5 * std.x, 1.5 * std.y, 1.5 * std.z];
    if !opts.fix_ellipsoid {
        p0.extend([1.0, 1.0]);
    }
    p0.extend(centroid.iter());
    p0.extend([0.0, 0.0, 0.0]);
    let cfg = LmConfig {
        max_iter: opts.max_iter,
        rel_tol: 1e-12,
        ..LmConfig::default()
    };
    let report = optim::minimize(&problem, DVector::from_vec(p0), &cfg);
    let mut sq = problem.unpack(&report.params);

    let mut scale = 1.0;
    if let Some(fraction) = opts.enclose {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return invalid("enclose fraction must be in (0, 1]");
        }
        let mut vals: Vec<f64> = cloud.points.iter().map(|p| sq.eval_f(p)).collect();
        vals.sort_by(f64::total_cmp);
        let idx = ((fraction * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1;
        let f = vals[idx];
        if f > 1.0 {
            // F is homogeneous of degree 2/l4 in the semi-axes
            scale = f.powf(sq.lambda[3] / 2.0) * (1.0 + 1e-12);
            for l in sq.lambda.iter_mut().take(3) {
                *l *= scale;
            }
        }
    }

    Ok(FitResult {
        superquadric: sq,
        residual: 2.0 * report.cost,
        initial_residual: 2.0 * report.initial_cost,
        iterations: report.iterations,
        warning: !report.converged(),
        enclose_scale: scale,
    })
}
