//! Base manifolds, open covers, and paths with sitting instants.

pub mod cover;
pub mod manifold;
pub mod partition;
pub mod path;

/// A point of the base manifold, as an ambient 3-vector.
pub type Point = nalgebra::Vector3<f64>;

/// An ambient tangent vector.
pub type Tangent = nalgebra::Vector3<f64>;

pub use cover::{ChartPoint, Cover, CoverSet, Region};
pub use manifold::{sphere_coordinate_fields, sphere_point, Manifold, ManifoldKind};
pub use partition::{decompose_path, PathPartition};
pub use path::{compose_paths, invert_path, reparameterization_family, reparameterize, tangent, Path};
