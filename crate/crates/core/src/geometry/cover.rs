use nalgebra::{Vector2, Vector3};

use super::manifold::{Manifold, ManifoldKind, PLANE_EXTENT};
use super::path::Path;
use super::{Point, Tangent};
use crate::error::{Error, Result};

/// Chart coordinates.
pub type ChartPoint = Vector2<f64>;

/// Shape of a cover set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// The whole plane, charted by `(x, y)`.
    WholePlane,
    /// Spherical cap `z > -limit` (north) or `z < limit` (south), charted by
    /// stereographic projection from the opposite pole.
    Cap { north: bool, limit: f64 },
    /// Axis-aligned box in the plane (bounds may be infinite), charted by
    /// `(x, y)` and contracted onto `basepoint`.
    PlaneBox {
        lo: [f64; 2],
        hi: [f64; 2],
        basepoint: [f64; 2],
    },
}

/// An open set of a cover, with a chart and a contraction onto its basepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSet {
    id: usize,
    name: String,
    manifold: Manifold,
    region: Region,
}

impl CoverSet {
    pub fn new(id: usize, name: impl Into<String>, manifold: Manifold, region: Region) -> Result<Self> {
        let ok = match region {
            Region::WholePlane | Region::PlaneBox { .. } => manifold.kind() == ManifoldKind::PlaneR2,
            Region::Cap { limit, .. } => {
                manifold.kind() == ManifoldKind::SphereS2 && limit > -1.0 && limit < 1.0
            }
        };
        if !ok {
            return Err(Error::UnsupportedGroup(format!(
                "region {region:?} is not available on {:?}",
                manifold.kind()
            )));
        }
        Ok(Self {
            id,
            name: name.into(),
            manifold,
            region,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn region(&self) -> Region {
        self.region
    }

    /// Signed distance-like clearance: positive inside, negative outside.
    pub fn clearance(&self, p: &Point) -> f64 {
        match self.region {
            Region::WholePlane => f64::INFINITY,
            Region::Cap { north: true, limit } => p.z + limit,
            Region::Cap { north: false, limit } => limit - p.z,
            Region::PlaneBox { lo, hi, .. } => {
                let mut c = f64::INFINITY;
                for (k, x) in [p.x, p.y].into_iter().enumerate() {
                    c = c.min(x - lo[k]).min(hi[k] - x);
                }
                c
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.clearance(p) > 0.0
    }

    pub fn chart(&self, p: &Point) -> ChartPoint {
        match self.region {
            Region::Cap { north: true, .. } => p.xy() / (1.0 + p.z),
            Region::Cap { north: false, .. } => p.xy() / (1.0 - p.z),
            _ => p.xy(),
        }
    }

    pub fn chart_inverse(&self, q: &ChartPoint) -> Point {
        match self.region {
            Region::Cap { north, .. } => {
                let r2 = q.norm_squared();
                let d = 1.0 + r2;
                let z = if north { (1.0 - r2) / d } else { (r2 - 1.0) / d };
                Vector3::new(2.0 * q.x / d, 2.0 * q.y / d, z)
            }
            _ => Vector3::new(q.x, q.y, 0.0),
        }
    }

    /// Ambient image of the chart vector `w` at chart point `q`.
    pub fn chart_pushforward(&self, q: &ChartPoint, w: &Vector2<f64>) -> Tangent {
        match self.region {
            Region::Cap { north, .. } => {
                let (u, v) = (q.x, q.y);
                let d = 1.0 + u * u + v * v;
                let d2 = d * d;
                let dx = Vector2::new(2.0 * (1.0 + v * v - u * u), -4.0 * u * v) / d2;
                let dy = Vector2::new(-4.0 * u * v, 2.0 * (1.0 + u * u - v * v)) / d2;
                let sign = if north { -1.0 } else { 1.0 };
                let dz = Vector2::new(4.0 * u, 4.0 * v) * (sign / d2);
                Vector3::new(dx.dot(w), dy.dot(w), dz.dot(w))
            }
            _ => Vector3::new(w.x, w.y, 0.0),
        }
    }

    /// Chart image of the ambient tangent `v` at `p`.
    pub fn chart_differential(&self, p: &Point, v: &Tangent) -> Vector2<f64> {
        match self.region {
            Region::Cap { north: true, .. } => {
                let s = 1.0 + p.z;
                v.xy() / s - p.xy() * (v.z / (s * s))
            }
            Region::Cap { north: false, .. } => {
                let s = 1.0 - p.z;
                v.xy() / s + p.xy() * (v.z / (s * s))
            }
            _ => v.xy(),
        }
    }

    /// Bounding rectangle of the chart image (clipped to the plane window).
    pub fn chart_bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self.region {
            Region::WholePlane => ([-PLANE_EXTENT; 2], [PLANE_EXTENT; 2]),
            Region::Cap { limit, .. } => {
                let r = (1.0 - limit * limit).sqrt() / (1.0 - limit);
                ([-r; 2], [r; 2])
            }
            Region::PlaneBox { lo, hi, .. } => (
                [lo[0].max(-PLANE_EXTENT), lo[1].max(-PLANE_EXTENT)],
                [hi[0].min(PLANE_EXTENT), hi[1].min(PLANE_EXTENT)],
            ),
        }
    }

    pub fn basepoint(&self) -> Point {
        match self.region {
            Region::WholePlane => Vector3::zeros(),
            Region::Cap { north, .. } => {
                if north {
                    Vector3::z()
                } else {
                    -Vector3::z()
                }
            }
            Region::PlaneBox { basepoint, .. } => Vector3::new(basepoint[0], basepoint[1], 0.0),
        }
    }

    /// Path from `p` to the basepoint inside the set: a straight chart segment
    /// (chart images are convex).
    pub fn contraction(&self, p: &Point) -> Path {
        let q0 = self.chart(p);
        let q1 = self.chart(&self.basepoint());
        self.chart_segment(q0, q1)
    }

    /// Straight segment between two chart points, mapped to the manifold.
    pub fn chart_segment(&self, q0: ChartPoint, q1: ChartPoint) -> Path {
        let set = self.clone();
        Path::from_core(move |s| set.chart_inverse(&(q0 + (q1 - q0) * s)))
    }
}

/// An open cover of a manifold, standing in for the surjective submersion.
#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    manifold: Manifold,
    sets: Vec<CoverSet>,
}

impl Cover {
    pub fn new(manifold: Manifold, sets: Vec<CoverSet>) -> Result<Self> {
        for (k, s) in sets.iter().enumerate() {
            if s.id != k || s.manifold != manifold {
                return Err(Error::Scene(format!("cover set {k} is inconsistent")));
            }
        }
        Ok(Self { manifold, sets })
    }

    /// Two polar caps overlapping on `|z| < overlap`.
    pub fn two_caps(overlap: f64) -> Self {
        let m = Manifold::sphere();
        let sets = vec![
            CoverSet::new(0, "N", m, Region::Cap { north: true, limit: overlap }).unwrap(),
            CoverSet::new(1, "S", m, Region::Cap { north: false, limit: overlap }).unwrap(),
        ];
        Self { manifold: m, sets }
    }

    /// Four overlapping quadrants of the plane; each pair of neighbours
    /// overlaps on a band of width `2 * overlap` around an axis.
    pub fn plane_grid(overlap: f64) -> Self {
        let m = Manifold::plane();
        let inf = f64::INFINITY;
        let specs = [
            ("SW", [-inf, -inf], [overlap, overlap], [-1.0, -1.0]),
            ("SE", [-overlap, -inf], [inf, overlap], [1.0, -1.0]),
            ("NW", [-inf, -overlap], [overlap, inf], [-1.0, 1.0]),
            ("NE", [-overlap, -overlap], [inf, inf], [1.0, 1.0]),
        ];
        let sets = specs
            .iter()
            .enumerate()
            .map(|(k, (name, lo, hi, base))| {
                CoverSet::new(
                    k,
                    *name,
                    m,
                    Region::PlaneBox {
                        lo: *lo,
                        hi: *hi,
                        basepoint: *base,
                    },
                )
                .unwrap()
            })
            .collect();
        Self { manifold: m, sets }
    }

    /// The plane covered by a single chart.
    pub fn plane_single() -> Self {
        let m = Manifold::plane();
        Self {
            manifold: m,
            sets: vec![CoverSet::new(0, "R2", m, Region::WholePlane).unwrap()],
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn sets(&self) -> &[CoverSet] {
        &self.sets
    }

    pub fn set(&self, id: usize) -> Result<&CoverSet> {
        self.sets.get(id).ok_or(Error::OutOfDomain {
            what: format!("cover set {id}"),
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// The set with the largest clearance at `p` (lowest id on ties).
    pub fn best_set(&self, p: &Point) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for s in &self.sets {
            let c = s.clearance(p);
            if c > best.1 {
                best = (s.id, c);
            }
        }
        best
    }

    /// Probes `n` manifold samples and returns the smallest best clearance;
    /// fails if some sample lies in no set.
    pub fn check_coverage(&self, n: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for p in self.manifold.sample_grid(n) {
            let (_, c) = self.best_set(&p);
            if c <= 0.0 {
                return Err(Error::NoCoveringSet { t: f64::NAN });
            }
            worst = worst.min(c);
        }
        Ok(worst)
    }
}
