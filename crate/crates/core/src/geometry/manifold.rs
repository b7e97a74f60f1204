use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Point, Tangent};

/// Tolerance on the membership equation of the embedded presets.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Half-width of the square window used to sample the (unbounded) plane.
pub const PLANE_EXTENT: f64 = 2.0;

const TORUS_MAJOR: f64 = 2.0;
const TORUS_MINOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    PlaneR2,
    SphereS2,
    TorusT2,
    CircleS1,
}

/// One of the embedded base manifolds. Points are ambient 3-vectors; the
/// plane and circle live in `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Manifold {
    kind: ManifoldKind,
    ambient_dim: usize,
}

impl Manifold {
    pub const fn new(kind: ManifoldKind) -> Self {
        let ambient_dim = match kind {
            ManifoldKind::PlaneR2 | ManifoldKind::CircleS1 => 2,
            ManifoldKind::SphereS2 | ManifoldKind::TorusT2 => 3,
        };
        Self { kind, ambient_dim }
    }

    pub const fn plane() -> Self {
        Self::new(ManifoldKind::PlaneR2)
    }

    pub const fn sphere() -> Self {
        Self::new(ManifoldKind::SphereS2)
    }

    pub const fn torus() -> Self {
        Self::new(ManifoldKind::TorusT2)
    }

    pub const fn circle() -> Self {
        Self::new(ManifoldKind::CircleS1)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::CircleS1 => 1,
            _ => 2,
        }
    }

    /// Violation of the membership equation at `p`.
    pub fn residual(&self, p: &Point) -> f64 {
        match self.kind {
            ManifoldKind::PlaneR2 => p.z.abs(),
            ManifoldKind::SphereS2 => (p.norm() - 1.0).abs(),
            ManifoldKind::CircleS1 => p.z.abs().max((p.xy().norm() - 1.0).abs()),
            ManifoldKind::TorusT2 => {
                let rho = p.xy().norm();
                ((rho - TORUS_MAJOR).hypot(p.z) - TORUS_MINOR).abs()
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.residual(p) <= MEMBERSHIP_TOL
    }

    /// Closest-point projection onto the manifold.
    pub fn project(&self, p: &Point) -> Point {
        match self.kind {
            ManifoldKind::PlaneR2 => Vector3::new(p.x, p.y, 0.0),
            ManifoldKind::SphereS2 => p / p.norm(),
            ManifoldKind::CircleS1 => {
                let xy = p.xy() / p.xy().norm();
                Vector3::new(xy.x, xy.y, 0.0)
            }
            ManifoldKind::TorusT2 => {
                let rho = p.xy().norm();
                let core = Vector3::new(TORUS_MAJOR * p.x / rho, TORUS_MAJOR * p.y / rho, 0.0);
                let d = p - core;
                core + d * (TORUS_MINOR / d.norm())
            }
        }
    }

    /// Removes the normal component of `v` at `p`.
    pub fn project_tangent(&self, p: &Point, v: &Tangent) -> Tangent {
        let basis = self.tangent_basis(p);
        basis.iter().map(|e| e * e.dot(v)).sum()
    }

    /// Orthonormal basis of the tangent space at `p`. On the sphere this is
    /// `(e_theta, e_phi)` away from the poles.
    pub fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        match self.kind {
            ManifoldKind::PlaneR2 => vec![Vector3::x(), Vector3::y()],
            ManifoldKind::SphereS2 => {
                let rho = p.xy().norm();
                if rho > 1e-9 {
                    let n = p / p.norm();
                    let e_phi = Vector3::new(-p.y / rho, p.x / rho, 0.0);
                    let e_theta = e_phi.cross(&n);
                    vec![e_theta, e_phi]
                } else {
                    vec![Vector3::x(), Vector3::y()]
                }
            }
            ManifoldKind::CircleS1 => {
                let rho = p.xy().norm();
                vec![Vector3::new(-p.y / rho, p.x / rho, 0.0)]
            }
            ManifoldKind::TorusT2 => {
                let rho = p.xy().norm();
                let e_u = Vector3::new(-p.y / rho, p.x / rho, 0.0);
                let core = Vector3::new(TORUS_MAJOR * p.x / rho, TORUS_MAJOR * p.y / rho, 0.0);
                let normal = (p - core).normalize();
                vec![e_u, normal.cross(&e_u)]
            }
        }
    }

    /// Deterministic sample of roughly `n` points covering the manifold
    /// (the plane is sampled on its `PLANE_EXTENT` window).
    pub fn sample_grid(&self, n: usize) -> Vec<Point> {
        let side = (n as f64).sqrt().ceil() as usize;
        match self.kind {
            ManifoldKind::PlaneR2 => {
                let mut out = Vec::with_capacity(side * side);
                for a in 0..side {
                    for b in 0..side {
                        let x = -PLANE_EXTENT + 2.0 * PLANE_EXTENT * a as f64 / (side - 1) as f64;
                        let y = -PLANE_EXTENT + 2.0 * PLANE_EXTENT * b as f64 / (side - 1) as f64;
                        out.push(Vector3::new(x, y, 0.0));
                    }
                }
                out
            }
            ManifoldKind::SphereS2 => {
                // Fibonacci lattice plus both poles.
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let mut out: Vec<Point> = (0..n)
                    .map(|k| {
                        let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        Vector3::new(r * phi.cos(), r * phi.sin(), z)
                    })
                    .collect();
                out.push(Vector3::z());
                out.push(-Vector3::z());
                out
            }
            ManifoldKind::CircleS1 => (0..n)
                .map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / n as f64;
                    Vector3::new(phi.cos(), phi.sin(), 0.0)
                })
                .collect(),
            ManifoldKind::TorusT2 => {
                let mut out = Vec::with_capacity(side * side);
                for a in 0..side {
                    for b in 0..side {
                        let u = std::f64::consts::TAU * a as f64 / side as f64;
                        let v = std::f64::consts::TAU * b as f64 / side as f64;
                        let rho = TORUS_MAJOR + TORUS_MINOR * v.cos();
                        out.push(Vector3::new(rho * u.cos(), rho * u.sin(), TORUS_MINOR * v.sin()));
                    }
                }
                out
            }
        }
    }
}

/// Point on the unit sphere with polar angle `theta` and azimuth `phi`.
pub fn sphere_point(theta: f64, phi: f64) -> Point {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Coordinate vector fields `d/dtheta` and `d/dphi` at `p` on the sphere.
pub fn sphere_coordinate_fields(p: &Point) -> (Tangent, Tangent) {
    let theta = p.z.clamp(-1.0, 1.0).acos();
    let phi = p.y.atan2(p.x);
    let d_theta = Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin());
    let d_phi = Vector3::new(-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0);
    (d_theta, d_phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_land_on_the_manifold() {
        let p = Vector3::new(0.3, -1.2, 0.7);
        for m in [Manifold::plane(), Manifold::sphere(), Manifold::torus(), Manifold::circle()] {
            let q = m.project(&p);
            assert!(m.contains(&q), "{m:?}");
            for e in m.tangent_basis(&q) {
                assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_tangents_are_orthogonal_to_position() {
        for p in Manifold::sphere().sample_grid(200) {
            let basis = Manifold::sphere().tangent_basis(&p);
            assert!(basis[0].dot(&p).abs() < 1e-12);
            assert!(basis[1].dot(&p).abs() < 1e-12);
            assert!(basis[0].dot(&basis[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_samples_satisfy_membership() {
        for p in Manifold::torus().sample_grid(400) {
            assert!(Manifold::torus().contains(&p));
        }
    }
}
