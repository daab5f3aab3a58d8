use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dmp::Vec3;
use crate::error::{invalid, Result};

/// Solid ellipsoid `{p : |D^-1 R^T (p - c)| <= 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub semi_axes: Vec3,
    /// Columns are the principal axes in world coordinates.
    pub rotation: Matrix3<f64>,
}

impl Ellipsoid {
    pub fn new(center: Vec3, semi_axes: Vec3, rotation: Matrix3<f64>) -> Result<Self> {
        if semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return invalid(format!("ellipsoid semi-axes must be positive: {semi_axes:?}"));
        }
        if (rotation.transpose() * rotation - Matrix3::identity()).amax() > 1e-9
            || (rotation.determinant() - 1.0).abs() > 1e-9
        {
            return invalid("ellipsoid orientation is not a proper rotation");
        }
        Ok(Self {
            center,
            semi_axes,
            rotation,
        })
    }

    pub fn axis_aligned(center: Vec3, semi_axes: Vec3) -> Result<Self> {
        Self::new(center, semi_axes, Matrix3::identity())
    }

    pub fn to_body(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.center)
    }

    /// Inside-outside function: < 1 inside, 1 on the surface, > 1 outside.
    pub fn inside_value(&self, p: &Vec3) -> f64 {
        self.to_body(p).component_div(&self.semi_axes).norm_squared()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.inside_value(p) <= 1.0
    }

    /// Euclidean distance from `p` to the surface, 0 for interior points.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let y = self.to_body(p).abs();
        let a = self.semi_axes;
        let f = y.component_div(&a).norm_squared();
        if f <= 1.0 {
            return 0.0;
        }
        // Closest point is a_i^2 y_i / (t + a_i^2) where t > 0 solves
        // G(t) = sum (a_i y_i / (t + a_i^2))^2 - 1 = 0. G is convex and
        // decreasing on t > 0, so Newton from a lower bound converges
        // monotonically.
        let g = |t: f64| -> (f64, f64) {
            let mut val = -1.0;
            let mut der = 0.0;
            for i in 0..3 {
                let s = a[i] * y[i] / (t + a[i] * a[i]);
                val += s * s;
                der -= 2.0 * s * s / (t + a[i] * a[i]);
            }
            (val, der)
        };
        let mut t = (0..3)
            .map(|i| a[i] * y[i] - a[i] * a[i])
            .fold(0.0f64, f64::max);
        for _ in 0..100 {
            let (val, der) = g(t);
            if val <= 0.0 || der == 0.0 {
                break;
            }
            let next = t - val / der;
            if !(next > t) || (next - t) <= 1e-16 * next {
                t = next.max(t);
                break;
            }
            t = next;
        }
        let mut d2 = 0.0;
        for i in 0..3 {
            let q = a[i] * a[i] * y[i] / (t + a[i] * a[i]);
            d2 += (y[i] - q).powi(2);
        }
        d2.sqrt()
    }

    /// Point of the surface furthest along `dir`.
    pub fn support(&self, dir: &Vec3) -> Vec3 {
        let local = self.rotation.transpose() * dir;
        let scaled = local.component_mul(&self.semi_axes);
        let n = scaled.norm();
        if n == 0.0 {
            return self.center;
        }
        let q = scaled.component_mul(&self.semi_axes) / n;
        self.center + self.rotation * q
    }

    /// Smallest distance from the segment `a`-`b` to the surface, 0 when
    /// the segment touches the body. Distance to a convex body is convex
    /// along a line, so a golden-section search is exact to tolerance.
    pub fn segment_distance(&self, a: &Vec3, b: &Vec3) -> f64 {
        let f = |t: f64| self.distance(&(a + (b - a) * t));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while hi - lo > 1e-10 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        f(0.0).min(f(1.0)).min(f(0.5 * (lo + hi)))
    }

    pub fn max_semi_axis(&self) -> f64 {
        self.semi_axes.max()
    }
}
