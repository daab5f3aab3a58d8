use nalgebra::{Matrix2, Matrix3x2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use super::ellipsoid::Ellipsoid;
use crate::dmp::Vec3;
use crate::error::{invalid, Error, Result};

/// Plane through `origin` with orthonormal in-plane basis `(u, v)` and
/// `normal = u x v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(origin: Vec3, normal: Vec3) -> Result<Self> {
        let n = normal
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("plane normal is zero".into()))?;
        // Seed the basis with the world axis least aligned with the normal.
        let seed = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u = (seed - n * n.dot(&seed)).normalize();
        Ok(Self {
            origin,
            u,
            v: n.cross(&u),
            normal: n,
        })
    }

    /// Plane through `origin` spanned by `a` and `b`; `u` is along `a`.
    pub fn spanned(origin: Vec3, a: &Vec3, b: &Vec3) -> Result<Self> {
        let u = a
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("plane direction is zero".into()))?;
        let w = b - u * u.dot(b);
        if w.norm() <= 1e-9 * b.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateGeometry("plane directions are parallel".into()));
        }
        let v = w.normalize();
        Ok(Self {
            origin,
            u,
            v,
            normal: u.cross(&v),
        })
    }

    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.normal.dot(&(p - self.origin))
    }

    pub fn project_dir(&self, d: &Vec3) -> Vec3 {
        d - self.normal * self.normal.dot(d)
    }

    pub fn to_plane(&self, p: &Vec3) -> Vector2<f64> {
        let r = p - self.origin;
        Vector2::new(r.dot(&self.u), r.dot(&self.v))
    }

    pub fn from_plane(&self, s: &Vector2<f64>) -> Vec3 {
        self.origin + self.u * s.x + self.v * s.y
    }
}

/// Ellipse cut from an ellipsoid by a plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseSection {
    /// Semi-axes, largest first.
    pub lambda_p: (f64, f64),
    pub center: Vec3,
    /// Plane actually cut; differs from the requested one when `fallback`.
    pub plane: Plane,
    /// Unit in-plane directions of the two semi-axes.
    pub axes: [Vec3; 2],
    /// The requested plane missed the body and was moved to its centre.
    pub fallback: bool,
}

impl EllipseSection {
    /// Circle or ellipse given directly in a plane; `major` is projected
    /// into the plane.
    pub fn new(center: Vec3, plane: Plane, major: &Vec3, lambda_p: (f64, f64)) -> Result<Self> {
        let (a, b) = lambda_p;
        if !(a >= b && b > 0.0) || !a.is_finite() {
            return invalid(format!("section semi-axes must satisfy a >= b > 0: {lambda_p:?}"));
        }
        let e1 = plane
            .project_dir(major)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("major axis normal to plane".into()))?;
        Ok(Self {
            lambda_p,
            center: plane.project(&center),
            plane,
            axes: [e1, plane.normal.cross(&e1)],
            fallback: false,
        })
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.lambda_p.0 * self.lambda_p.1
    }

    /// Half-width of the ellipse along the in-plane part of `dir`.
    pub fn half_width(&self, dir: &Vec3) -> f64 {
        let Some(d) = self.plane.project_dir(dir).try_normalize(1e-12) else {
            return 0.0;
        };
        let (a, b) = self.lambda_p;
        ((a * d.dot(&self.axes[0])).powi(2) + (b * d.dot(&self.axes[1])).powi(2)).sqrt()
    }

    /// Boundary point furthest along the in-plane part of `dir`; the centre
    /// if `dir` is normal to the plane.
    pub fn support(&self, dir: &Vec3) -> Vec3 {
        let (a, b) = self.lambda_p;
        let d = self.plane.project_dir(dir);
        let (p, q) = (a * a * d.dot(&self.axes[0]), b * b * d.dot(&self.axes[1]));
        let n = (a * a * d.dot(&self.axes[0]).powi(2) + b * b * d.dot(&self.axes[1]).powi(2)).sqrt();
        if n <= 1e-300 {
            return self.center;
        }
        self.center + (self.axes[0] * p + self.axes[1] * q) / n
    }

    /// In-plane conic value: < 1 inside, 1 on the boundary.
    pub fn inside_value(&self, p: &Vec3) -> f64 {
        let r = self.plane.project(p) - self.center;
        (r.dot(&self.axes[0]) / self.lambda_p.0).powi(2) + (r.dot(&self.axes[1]) / self.lambda_p.1).powi(2)
    }
}

/// Exact section of `ell` by the plane through `origin` with normal
/// `normal`. A plane that misses the body is replaced by the parallel plane
/// through the centre and the result is flagged.
pub fn section_pplane(ell: &Ellipsoid, origin: &Vec3, normal: &Vec3) -> Result<EllipseSection> {
    section_plane(ell, &Plane::new(*origin, *normal)?)
}

/// As [`section_pplane`] for an already constructed plane, keeping its basis.
pub fn section_plane(ell: &Ellipsoid, plane: &Plane) -> Result<EllipseSection> {
    if let Some(s) = section_in(ell, plane) {
        return Ok(s);
    }
    let moved = Plane {
        origin: ell.center,
        ..*plane
    };
    let mut s = section_in(ell, &moved).ok_or_else(|| Error::DegenerateGeometry("central section is empty".into()))?;
    s.fallback = true;
    Ok(s)
}

fn section_in(ell: &Ellipsoid, plane: &Plane) -> Option<EllipseSection> {
    // Unit-sphere coordinates: w = D^-1 R^T (p - c). Points of the plane
    // map to w0 + F s, and the section is |w0 + F s|^2 = 1.
    let inv_d = Vec3::new(1.0 / ell.semi_axes.x, 1.0 / ell.semi_axes.y, 1.0 / ell.semi_axes.z);
    let to_unit = |v: &Vec3| (ell.rotation.transpose() * v).component_mul(&inv_d);
    let w0 = to_unit(&(plane.origin - ell.center));
    let f = Matrix3x2::from_columns(&[to_unit(&plane.u), to_unit(&plane.v)]);
    let m: Matrix2<f64> = f.transpose() * f;
    let b = f.transpose() * w0;
    let m_inv = m.try_inverse()?;
    let s0 = -(m_inv * b);
    let rhs = 1.0 - w0.norm_squared() + b.dot(&(m_inv * b));
    if !(rhs > 0.0) {
        return None;
    }
    let eig = SymmetricEigen::new(m);
    let (i_major, i_minor) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let a = (rhs / eig.eigenvalues[i_major]).sqrt();
    let c = (rhs / eig.eigenvalues[i_minor]).sqrt();
    let dir = |i: usize| {
        let e = eig.eigenvectors.column(i);
        (plane.u * e[0] + plane.v * e[1]).normalize()
    };
    let e1 = dir(i_major);
    Some(EllipseSection {
        lambda_p: (a, c),
        center: plane.from_plane(&s0),
        plane: *plane,
        axes: [e1, plane.normal.cross(&e1)],
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    #[test]
    fn sphere_sections_through_centre() {
        let s = Ellipsoid::axis_aligned(Vec3::new(1.0, 2.0, 3.0), Vec3::repeat(0.3)).unwrap();
        for n in [Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.3, -2.0, 0.7)] {
            let sec = section_pplane(&s, &s.center, &n).unwrap();
            assert_relative_eq!(sec.lambda_p.0, 0.3, epsilon = 1e-12);
            assert_relative_eq!(sec.lambda_p.1, 0.3, epsilon = 1e-12);
            assert!(!sec.fallback);
        }
    }

    #[test]
    fn principal_section() {
        let e = Ellipsoid::axis_aligned(Vec3::zeros(), Vec3::new(0.1, 0.3, 0.2)).unwrap();
        let sec = section_pplane(&e, &Vec3::zeros(), &Vec3::z()).unwrap();
        assert_relative_eq!(sec.lambda_p.0, 0.3, epsilon = 1e-12);
        assert_relative_eq!(sec.lambda_p.1, 0.1, epsilon = 1e-12);
        assert_relative_eq!(sec.axes[0].y.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn offset_plane_of_spheroid() {
        // Plane z = 0.05 through (0.2, 0.1, 0.1): (x/0.2)^2 + (y/0.1)^2 = 0.75.
        let e = Ellipsoid::axis_aligned(Vec3::zeros(), Vec3::new(0.2, 0.1, 0.1)).unwrap();
        let sec = section_pplane(&e, &Vec3::new(0.0, 0.0, 0.05), &Vec3::z()).unwrap();
        let k = 0.75f64.sqrt();
        assert_relative_eq!(sec.lambda_p.0, 0.2 * k, epsilon = 1e-12);
        assert_relative_eq!(sec.lambda_p.1, 0.1 * k, epsilon = 1e-12);
        assert_relative_eq!(sec.center, Vec3::new(0.0, 0.0, 0.05), epsilon = 1e-12);
    }

    #[test]
    fn boundary_points_lie_on_ellipsoid() {
        let r = Rotation3::from_euler_angles(0.3, -0.5, 1.1).into_inner();
        let e = Ellipsoid::new(Vec3::new(0.5, -0.2, 0.1), Vec3::new(0.25, 0.1, 0.15), r).unwrap();
        let sec = section_pplane(&e, &Vec3::new(0.52, -0.18, 0.12), &Vec3::new(0.2, 0.9, -0.3)).unwrap();
        for i in 0..32 {
            let t = i as f64 * std::f64::consts::TAU / 32.0;
            let p = sec.center
                + sec.axes[0] * sec.lambda_p.0 * t.cos()
                + sec.axes[1] * sec.lambda_p.1 * t.sin();
            assert_relative_eq!(e.inside_value(&p), 1.0, epsilon = 1e-10);
            assert!(sec.plane.normal.dot(&(p - sec.plane.origin)).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_plane_falls_back_to_centre() {
        let e = Ellipsoid::axis_aligned(Vec3::zeros(), Vec3::new(0.2, 0.1, 0.1)).unwrap();
        let sec = section_pplane(&e, &Vec3::new(0.0, 0.0, 0.5), &Vec3::z()).unwrap();
        assert!(sec.fallback);
        assert_relative_eq!(sec.lambda_p.0, 0.2, epsilon = 1e-12);
        assert_relative_eq!(sec.center, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn support_and_half_width() {
        let plane = Plane::new(Vec3::zeros(), Vec3::z()).unwrap();
        let sec = EllipseSection::new(Vec3::zeros(), plane, &Vec3::x(), (0.3, 0.1)).unwrap();
        assert_relative_eq!(sec.support(&Vec3::y()), Vec3::new(0.0, 0.1, 0.0), epsilon = 1e-12);
        assert_relative_eq!(sec.half_width(&Vec3::new(1.0, 0.0, 5.0)), 0.3, epsilon = 1e-12);
        assert_eq!(sec.support(&Vec3::z()), Vec3::zeros());
        assert!(EllipseSection::new(Vec3::zeros(), plane, &Vec3::x(), (0.1, 0.3)).is_err());
    }
}
