use super::section::EllipseSection;
use crate::dmp::Vec3;
use crate::error::{invalid, Result};

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Unit direction, orthogonal to the chord, on which the path passes the
/// section: away from the section centre, or along `fallback_side` when the
/// centre lies on the chord.
pub fn avoidance_side(section: &EllipseSection, start: &Vec3, goal: &Vec3, fallback_side: &Vec3) -> Result<Vec3> {
    let Some(axis) = (goal - start).try_normalize(1e-12) else {
        return invalid("start and goal coincide");
    };
    let perp = |v: Vec3| v - axis * axis.dot(&v);
    let offset = perp(section.center - start);
    if offset.norm() > 1e-9 {
        return Ok(-offset.normalize());
    }
    if let Some(s) = perp(*fallback_side).try_normalize(1e-12) {
        return Ok(s);
    }
    // Fallback parallel to the chord: use any orthogonal direction.
    let seed = if axis.z.abs() < 0.9 { Vec3::z() } else { Vec3::y() };
    Ok(perp(seed).normalize())
}

/// Boundary point of the section furthest from the chord on the avoidance
/// side.
pub fn extreme_point(section: &EllipseSection, start: &Vec3, goal: &Vec3, fallback_side: &Vec3) -> Result<Vec3> {
    let side = avoidance_side(section, start, goal, fallback_side)?;
    Ok(section.support(&side))
}

/// Length of the polyline from `start` through every obstacle's extreme
/// point, ordered along the chord, to `goal`.
pub fn estimate_path_length(
    start: &Vec3,
    goal: &Vec3,
    obstacles: &[EllipseSection],
    fallback_side: &Vec3,
) -> Result<f64> {
    let axis = goal - start;
    let mut pts = obstacles
        .iter()
        .map(|s| extreme_point(s, start, goal, fallback_side))
        .collect::<Result<Vec<_>>>()?;
    if pts.is_empty() && axis.norm() <= 1e-12 {
        return invalid("start and goal coincide");
    }
    pts.sort_by(|a, b| axis.dot(&(a - start)).total_cmp(&axis.dot(&(b - start))));
    let mut seq = Vec::with_capacity(pts.len() + 2);
    seq.push(*start);
    seq.extend(pts);
    seq.push(*goal);
    Ok(polyline_length(&seq))
}
