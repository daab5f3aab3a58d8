use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dmp::Vec3;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CloudFrame {
    #[default]
    World,
    Local,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: CloudFrame,
}

fn parse_err(name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: name.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_xyz_line(name: &str, no: usize, line: &str) -> Result<Vec3> {
    let vals = line
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .take(3)
        .map(str::parse::<f64>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| parse_err(name, no, e.to_string()))?;
    if vals.len() != 3 {
        return Err(parse_err(name, no, "expected x y z"));
    }
    Ok(Vec3::new(vals[0], vals[1], vals[2]))
}

impl PointCloud {
    pub fn world(points: Vec<Vec3>) -> Self {
        Self {
            points,
            frame: CloudFrame::World,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One point per line, `x y z` (whitespace or comma separated).
    pub fn parse_xyz<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            points.push(parse_xyz_line(name, i + 1, t)?);
        }
        Ok(Self::world(points))
    }

    /// ASCII PLY holding a `vertex` element whose first three properties
    /// are `x`, `y`, `z`. Other elements must follow the vertices.
    pub fn parse_ply<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let next = |lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| -> Result<Option<(usize, String)>> {
            match lines.next() {
                Some((i, l)) => Ok(Some((i + 1, l?))),
                None => Ok(None),
            }
        };
        match next(&mut lines)? {
            Some((_, l)) if l.trim() == "ply" => {}
            _ => return Err(parse_err(name, 1, "missing 'ply' magic")),
        }
        let mut n_vertices = None;
        let mut props: Vec<String> = Vec::new();
        let mut in_vertex = false;
        let mut seen_format = false;
        loop {
            let Some((no, l)) = next(&mut lines)? else {
                return Err(parse_err(name, 0, "unterminated header"));
            };
            let tok: Vec<&str> = l.split_whitespace().collect();
            match tok.as_slice() {
                ["format", "ascii", _] => seen_format = true,
                ["format", other, ..] => {
                    return Err(parse_err(name, no, format!("unsupported PLY format '{other}'")))
                }
                ["comment", ..] | ["obj_info", ..] => {}
                ["element", "vertex", n] => {
                    n_vertices = Some(n.parse::<usize>().map_err(|e| parse_err(name, no, e.to_string()))?);
                    in_vertex = true;
                }
                ["element", ..] => {
                    if n_vertices.is_none() {
                        return Err(parse_err(name, no, "vertex element must come first"));
                    }
                    in_vertex = false;
                }
                ["property", "list", ..] if in_vertex => {
                    return Err(parse_err(name, no, "list properties on vertices are not supported"))
                }
                ["property", _, pname] => {
                    if in_vertex {
                        props.push(pname.to_string());
                    }
                }
                ["property", ..] => {}
                ["end_header"] => break,
                [] => {}
                _ => return Err(parse_err(name, no, format!("unexpected header line '{l}'"))),
            }
        }
        if !seen_format {
            return Err(parse_err(name, 0, "missing format line"));
        }
        let n = n_vertices.ok_or_else(|| parse_err(name, 0, "no vertex element"))?;
        let idx = |p: &str| props.iter().position(|q| q == p);
        let (Some(ix), Some(iy), Some(iz)) = (idx("x"), idx("y"), idx("z")) else {
            return Err(parse_err(name, 0, "vertex element lacks x/y/z properties"));
        };
        let mut points = Vec::with_capacity(n);
        while points.len() < n {
            let Some((no, l)) = next(&mut lines)? else {
                return Err(parse_err(name, 0, format!("expected {n} vertices, found {}", points.len())));
            };
            if l.trim().is_empty() {
                continue;
            }
            let vals = l
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(name, no, e.to_string()))?;
            if vals.len() < props.len() {
                return Err(parse_err(name, no, "short vertex line"));
            }
            points.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
        }
        Ok(Self::world(points))
    }

    /// Load by extension: `.ply` as ASCII PLY, anything else as XYZ text.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let name = path.display().to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => Self::parse_ply(reader, &name),
            _ => Self::parse_xyz(reader, &name),
        }
    }
}

/// Grow a cloud by the system's axis-aligned half-extents: every point is
/// kept and replicated at the eight signed corner offsets and the six face
/// centre offsets of the system box.
pub fn dilate_cloud(cloud: &PointCloud, half_extents: Vec3) -> Result<PointCloud> {
    if half_extents.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return invalid(format!("system half-extents must be non-negative: {half_extents:?}"));
    }
    if half_extents == Vec3::zeros() {
        return Ok(cloud.clone());
    }
    let h = half_extents;
    let mut offsets = Vec::with_capacity(14);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                offsets.push(Vec3::new(sx * h.x, sy * h.y, sz * h.z));
            }
        }
    }
    for axis in 0..3 {
        for s in [-1.0, 1.0] {
            let mut o = Vec3::zeros();
            o[axis] = s * h[axis];
            offsets.push(o);
        }
    }
    let mut points = Vec::with_capacity(cloud.len() * 15);
    for p in &cloud.points {
        points.push(*p);
        points.extend(offsets.iter().map(|o| p + o));
    }
    Ok(PointCloud {
        points,
        frame: cloud.frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_and_ply_agree() {
        let xyz = "# pts\n0 0 0\n1, 2, 3\n\n-1 0.5 2\n";
        let ply = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n0 0 0 1\n1 2 3 1\n-1 0.5 2 1\n";
        let a = PointCloud::parse_xyz(xyz.as_bytes(), "a.xyz").unwrap();
        let b = PointCloud::parse_ply(ply.as_bytes(), "b.ply").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn ply_errors() {
        let bin = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n";
        assert!(PointCloud::parse_ply(bin.as_bytes(), "b").is_err());
        let short = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(PointCloud::parse_ply(short.as_bytes(), "s").is_err());
        assert!(PointCloud::parse_xyz("1 2\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn dilation_keeps_input() {
        let c = PointCloud::world(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::zeros()]);
        assert_eq!(dilate_cloud(&c, Vec3::zeros()).unwrap(), c);
        let d = dilate_cloud(&c, Vec3::new(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(d.len(), 30);
        assert!(c.points.iter().all(|p| d.points.contains(p)));
        assert!(d.points.contains(&Vec3::new(1.1, 2.2, 3.3)));
        assert!(dilate_cloud(&c, Vec3::new(-0.1, 0.0, 0.0)).is_err());
    }
}
