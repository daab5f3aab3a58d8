#![allow(dead_code)]

use dmp_avoid::dmp::Vec3;
use dmp_avoid::geometry::{Ellipsoid, Plane};
use nalgebra::{DMatrix, DVector, Matrix2, Rotation3, SymmetricEigen, Vector2};
use rand::Rng;

pub fn random_rotation<R: Rng>(rng: &mut R) -> nalgebra::Matrix3<f64> {
    let axis = random_unit(rng);
    Rotation3::new(axis * rng.gen_range(0.0..std::f64::consts::PI)).into_inner()
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Area-uniform samples of an ellipsoid surface by rejection from the
/// mapped unit sphere.
pub fn surface_samples<R: Rng>(e: &Ellipsoid, n: usize, rng: &mut R) -> Vec<Vec3> {
    let a = e.semi_axes;
    let amin = a.min();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = random_unit(rng);
        let w = u.component_div(&a).norm() * amin;
        if rng.gen::<f64>() <= w {
            out.push(e.center + e.rotation * u.component_mul(&a));
        }
    }
    out
}

/// Independent section oracle: coarse search for an interior point of the
/// plane, bisection along dense rays for the F = 1 boundary, and a
/// least-squares conic fit. Returns (semi-axes major/minor, centre) or None
/// when the plane misses the body.
pub fn section_oracle(e: &Ellipsoid, plane: &Plane, rays: usize) -> Option<((f64, f64), Vec3)> {
    let f = |s: f64, t: f64| e.inside_value(&plane.from_plane(&Vector2::new(s, t)));
    let r = e.max_semi_axis() + (plane.origin - e.center).norm();
    let grid = 400;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=grid {
        for j in 0..=grid {
            let s = -r + 2.0 * r * i as f64 / grid as f64;
            let t = -r + 2.0 * r * j as f64 / grid as f64;
            let v = f(s, t);
            if v < best.0 {
                best = (v, s, t);
            }
        }
    }
    if best.0 >= 1.0 {
        return None;
    }
    let (s0, t0) = (best.1, best.2);
    let mut pts = Vec::with_capacity(rays);
    for k in 0..rays {
        let phi = k as f64 * std::f64::consts::TAU / rays as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let (mut lo, mut hi) = (0.0, 4.0 * r);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(s0 + m * c, t0 + m * s) <= 1.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let m = 0.5 * (lo + hi);
        pts.push((s0 + m * c, t0 + m * s));
    }
    // Conic A s^2 + B s t + C t^2 + D s + E t = 1, in coordinates relative
    // to the interior point for conditioning.
    let mut a = DMatrix::zeros(rays, 5);
    for (i, (s, t)) in pts.iter().enumerate() {
        let (s, t) = (s - s0, t - t0);
        a.set_row(i, &nalgebra::RowDVector::from_row_slice(&[s * s, s * t, t * t, s, t]));
    }
    let b = DVector::from_element(rays, 1.0);
    let x = a.svd(true, true).solve(&b, 1e-15).ok()?;
    let q = Matrix2::new(x[0], x[1] / 2.0, x[1] / 2.0, x[2]);
    let l = Vector2::new(x[3], x[4]);
    let c = -0.5 * q.try_inverse()? * l;
    let k = 1.0 + c.dot(&(q * c));
    let eig = SymmetricEigen::new(q);
    let ax0 = (k / eig.eigenvalues[0]).sqrt();
    let ax1 = (k / eig.eigenvalues[1]).sqrt();
    let centre = plane.from_plane(&Vector2::new(s0 + c.x, t0 + c.y));
    Some(((ax0.max(ax1), ax0.min(ax1)), centre))
}
