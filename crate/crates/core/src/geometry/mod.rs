//! Geometric approximates of obstacles: superquadric fitting, dilation by
//! the system's extents, planar sections and path-length estimates.

mod cloud;
mod ellipsoid;
mod path;
mod section;
mod superquadric;

pub use cloud::{dilate_cloud, CloudFrame, PointCloud};
pub use ellipsoid::Ellipsoid;
pub use path::{avoidance_side, estimate_path_length, extreme_point, polyline_length};
pub use section::{section_plane, section_pplane, EllipseSection, Plane};
pub use superquadric::{fit_superquadric, FitOptions, FitResult, Superquadric, MIN_SEMI_AXIS, SHAPE_RANGE};
