//! Wilson lines, holonomy maps, associated vector transport, flat sections,
//! small-loop curvature and the Chern number of U(1) cocycles on the sphere.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::connection::curvature;
use crate::descent::{factor_path, reconstruct_transport, AnchorChoice, DifferentialCocycle};
use crate::error::{Error, Result};
use crate::geometry::path::ENDPOINT_TOL;
use crate::geometry::{sphere_coordinate_fields, sphere_point, ManifoldKind, Path, Point, Region, Tangent};
use crate::lie::{adjoint, log_map, GroupKind, GroupSpec};
use crate::solver::SolverConfig;
use crate::{AlgebraElement, GroupElement};

/// Polar and azimuthal resolution of the Chern grid.
pub const CHERN_GRID: (usize, usize) = (200, 400);

/// Pass threshold of [`check_flat_section`].
pub const FLAT_SECTION_TOL: f64 = 1e-6;

/// A vector in a complex fibre.
pub type CVector = DVector<Complex<f64>>;

type RepFn = Arc<dyn Fn(&GroupElement, &CVector) -> CVector + Send + Sync>;

/// A finite-dimensional complex representation of a matrix group.
#[derive(Clone)]
pub struct Representation {
    spec: GroupSpec,
    dim: usize,
    apply: RepFn,
}

impl fmt::Debug for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Representation")
            .field("spec", &self.spec)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Representation {
    pub fn new<F>(spec: GroupSpec, dim: usize, apply: F) -> Self
    where
        F: Fn(&GroupElement, &CVector) -> CVector + Send + Sync + 'static,
    {
        Self {
            spec,
            dim,
            apply: Arc::new(apply),
        }
    }

    /// Matrices acting on `C^n`.
    pub fn defining(spec: GroupSpec) -> Self {
        Self::new(spec, spec.n(), |g, v| g.mat() * v)
    }

    /// `g -> det g` on `C`.
    pub fn determinant(spec: GroupSpec) -> Self {
        Self::new(spec, 1, |g, v| v * g.mat().determinant())
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, g: &GroupElement, v: &CVector) -> Result<CVector> {
        if g.spec() != self.spec {
            return Err(Error::UnsupportedGroup(format!(
                "representation of {} applied to {}",
                self.spec,
                g.spec()
            )));
        }
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok((self.apply)(g, v))
    }
}

/// Transport of `c` along `path`, between the anchor trivializations at its
/// endpoints.
pub fn wilson_line(c: &DifferentialCocycle, path: &Path, anchors: &AnchorChoice, cfg: &SolverConfig) -> Result<GroupElement> {
    let fp = factor_path(path, c, anchors)?;
    Ok(reconstruct_transport(&fp, c, cfg)?.value)
}

/// Wilson lines of loops sharing the basepoint of the first one.
pub fn holonomy_map(
    c: &DifferentialCocycle,
    loops: &[Path],
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
) -> Result<Vec<GroupElement>> {
    let Some(first) = loops.first() else {
        return Ok(Vec::new());
    };
    let x = first.start();
    for l in loops {
        let gap = (l.start() - x).norm().max((l.end() - x).norm());
        if gap > ENDPOINT_TOL {
            return Err(Error::BasepointMismatch { gap });
        }
    }
    loops.par_iter().map(|l| wilson_line(c, l, anchors, cfg)).collect()
}

/// `rho(W(gamma)) v`.
pub fn transport_vector(
    c: &DifferentialCocycle,
    rep: &Representation,
    path: &Path,
    v: &CVector,
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
) -> Result<CVector> {
    if v.len() != rep.dim() {
        return Err(Error::DimensionMismatch {
            expected: rep.dim(),
            got: v.len(),
        });
    }
    rep.apply(&wilson_line(c, path, anchors, cfg)?, v)
}

/// Values of a section at finitely many points, in the anchor
/// trivialization.
#[derive(Debug, Clone, Default)]
pub struct SectionSample {
    entries: Vec<(Point, CVector)>,
}

impl SectionSample {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: Point, v: CVector) {
        match self.entries.iter_mut().find(|(q, _)| (q - p).norm() <= ENDPOINT_TOL) {
            Some(entry) => entry.1 = v,
            None => self.entries.push((p, v)),
        }
    }

    pub fn get(&self, p: &Point) -> Option<&CVector> {
        self.entries
            .iter()
            .find(|(q, _)| (q - p).norm() <= ENDPOINT_TOL)
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatSectionReport {
    pub max_deviation: f64,
    pub n_paths: usize,
    pub pass: bool,
}

/// Compares the transported sample at each path start with the sample at
/// its end.
pub fn check_flat_section(
    c: &DifferentialCocycle,
    rep: &Representation,
    section: &SectionSample,
    paths: &[Path],
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
) -> Result<FlatSectionReport> {
    for (_, v) in &section.entries {
        if v.len() != rep.dim() {
            return Err(Error::DimensionMismatch {
                expected: rep.dim(),
                got: v.len(),
            });
        }
    }
    let deviations: Vec<f64> = paths
        .par_iter()
        .map(|path| {
            let start = section.get(&path.start()).ok_or(Error::MissingSample)?;
            let end = section.get(&path.end()).ok_or(Error::MissingSample)?;
            Ok((transport_vector(c, rep, path, start, anchors, cfg)? - end).norm())
        })
        .collect::<Result<_>>()?;
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(FlatSectionReport {
        max_deviation,
        n_paths: paths.len(),
        pass: max_deviation <= FLAT_SECTION_TOL,
    })
}

/// Curvature read off the holonomy of a small chart rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallLoopCurvature {
    /// `-log(H) / eps^2` for the loop based at `corner`.
    pub estimate: AlgebraElement,
    /// First corner of the rectangle, where the loop is based.
    pub corner: Point,
    /// Transport from the centre to the corner along a chart segment.
    pub corner_transport: GroupElement,
    /// `estimate` conjugated back to the centre.
    pub centered: AlgebraElement,
}

/// Holonomy of the chart rectangle of set `set_id` with sides `eps v`,
/// `eps w` centred at `p`, traversed `v, w, -v, -w`.
#[allow(clippy::too_many_arguments)]
pub fn small_loop_curvature(
    c: &DifferentialCocycle,
    set_id: usize,
    p: &Point,
    v: &Tangent,
    w: &Tangent,
    eps: f64,
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
) -> Result<SmallLoopCurvature> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("rectangle size {eps} must be positive")));
    }
    let set = c.cover().set(set_id)?;
    let q = set.chart(p);
    let cv = set.chart_differential(p, v) * eps;
    let cw = set.chart_differential(p, w) * eps;
    let corners = [
        q - (cv + cw) * 0.5,
        q + (cv - cw) * 0.5,
        q + (cv + cw) * 0.5,
        q + (cw - cv) * 0.5,
    ];
    for k in corners {
        if set.clearance(&set.chart_inverse(&k)) <= 0.0 {
            return Err(Error::OutOfDomain {
                what: format!("set {}", set.name()),
            });
        }
    }
    let sides: Vec<Path> = (0..4).map(|k| set.chart_segment(corners[k], corners[(k + 1) % 4])).collect();
    let lines = sides
        .par_iter()
        .map(|s| wilson_line(c, s, anchors, cfg))
        .collect::<Result<Vec<_>>>()?;
    let h = lines
        .iter()
        .fold(GroupElement::identity(c.spec()), |acc, l| l * &acc);
    let estimate = log_map(&h)?.scale(-1.0 / (eps * eps));
    let corner_transport = wilson_line(c, &set.chart_segment(q, corners[0]), anchors, cfg)?;
    let centered = adjoint(&corner_transport.inverse(), &estimate);
    Ok(SmallLoopCurvature {
        estimate,
        corner: set.chart_inverse(&corners[0]),
        corner_transport,
        centered,
    })
}

/// Compensated (Neumaier) sum.
fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `(1 / 2 pi i) * integral of K` over the sphere, by the midpoint rule on a
/// [`CHERN_GRID`] `(theta, phi)` grid, using at each node the form of the set
/// with the largest clearance.
pub fn chern_number(c: &DifferentialCocycle) -> Result<f64> {
    if c.spec().kind() != GroupKind::U1 {
        return Err(Error::UnsupportedGroup(format!("chern number needs U1, got {}", c.spec())));
    }
    let cover = c.cover();
    let caps = cover.sets().iter().all(|s| matches!(s.region(), Region::Cap { .. }));
    if cover.manifold().kind() != ManifoldKind::SphereS2 || !caps {
        return Err(Error::UnsupportedGroup("chern number needs a cap cover of the sphere".into()));
    }
    let (nt, np) = CHERN_GRID;
    let (dt, dp) = (PI / nt as f64, TAU / np as f64);
    let rows: Vec<f64> = (0..nt)
        .into_par_iter()
        .map(|a| {
            let theta = (a as f64 + 0.5) * dt;
            let values = (0..np)
                .map(|b| {
                    let p = sphere_point(theta, (b as f64 + 0.5) * dp);
                    let (d_theta, d_phi) = sphere_coordinate_fields(&p);
                    let (set, _) = cover.best_set(&p);
                    Ok(curvature(c.form(set)?, &p, &d_theta, &d_phi)?.mat()[(0, 0)].im)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(neumaier_sum(values))
        })
        .collect::<Result<_>>()?;
    Ok(neumaier_sum(rows) * dt * dp / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compose_paths, invert_path, Cover, Manifold};
    use crate::presets;
    use nalgebra::Vector3;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn scalar(g: &GroupElement) -> Complex<f64> {
        g.mat()[(0, 0)]
    }

    #[test]
    fn constant_path_has_identity_wilson_line() {
        let c = presets::monopole(2.0);
        let g = Path::constant(sphere_point(1.0, 0.4));
        let w = wilson_line(&c, &g, &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert!(w.distance_to_identity() < 1e-14);
    }

    #[test]
    fn monopole_latitude_matches_the_line_integral() {
        let k = 2.0;
        let theta = PI / 3.0;
        let c = presets::monopole(k);
        let w = wilson_line(&c, &Path::latitude(theta, 0.0), &AnchorChoice::max_clearance(), &cfg()).unwrap();
        // exp(-oint A_N) with A_N(d_phi) = i (k/2)(1 - cos theta).
        let expected = Complex::new(0.0, -0.5 * k * (1.0 - theta.cos()) * TAU).exp();
        assert!((scalar(&w) - expected).norm() < 1e-6, "{} vs {expected}", scalar(&w));
    }

    #[test]
    fn equator_holonomy_and_inverse() {
        let c = presets::monopole(1.0);
        let eq = Path::equator();
        let hs = holonomy_map(&c, &[eq.clone(), invert_path(&eq)], &AnchorChoice::max_clearance(), &cfg()).unwrap();
        for h in hs {
            assert!((scalar(&h) + 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn latitude_family_has_smooth_holonomy() {
        let k = 1.0;
        let c = presets::monopole(k);
        let h = 1e-3;
        let phase = |theta: f64| {
            let w = wilson_line(&c, &Path::latitude(theta, 0.0), &AnchorChoice::prefer(0), &cfg()).unwrap();
            scalar(&w)
        };
        for theta in [0.6, 1.1, 1.5] {
            let derivative = (phase(theta + h) - phase(theta - h)) / (2.0 * h);
            let omega = 2.0 * PI * (1.0 - theta.cos());
            let exact = Complex::new(0.0, -k * PI * theta.sin()) * Complex::new(0.0, -0.5 * k * omega).exp();
            assert!((derivative - exact).norm() < 1e-5, "{theta}: {derivative} vs {exact}");
        }
    }

    #[test]
    fn loops_at_other_basepoints_are_rejected() {
        let c = presets::monopole(1.0);
        let loops = [Path::latitude(1.0, 0.0), Path::latitude(1.2, 0.0)];
        let r = holonomy_map(&c, &loops, &AnchorChoice::max_clearance(), &cfg());
        assert!(matches!(r, Err(Error::BasepointMismatch { .. })));
    }

    #[test]
    fn holonomy_is_multiplicative() {
        let c = presets::su2_poly_bench();
        let m = Manifold::plane();
        let x = Vector3::new(0.3, 0.2, 0.0);
        let l1 = Path::waypoints(m, &[x, Vector3::new(1.0, 0.4, 0.0), Vector3::new(0.6, 1.0, 0.0), x]).unwrap();
        let l2 = Path::waypoints(m, &[x, Vector3::new(-0.5, 0.9, 0.0), Vector3::new(-0.8, -0.3, 0.0), x]).unwrap();
        let both = compose_paths(&l1, &l2).unwrap();
        let anchors = AnchorChoice::max_clearance();
        let hs = holonomy_map(&c, &[l1, l2, both], &anchors, &cfg()).unwrap();
        assert!((&hs[1] * &hs[0]).distance(&hs[2]) < 1e-8);
        let commutator = (&hs[0] * &hs[1]).distance(&(&hs[1] * &hs[0]));
        assert!(commutator > 0.01, "{commutator}");
    }

    #[test]
    fn representations_are_homomorphisms() {
        let spec = GroupSpec::su2();
        let rep = Representation::defining(spec);
        let g = crate::lie::exp_map(&AlgebraElement::su2(0.4, -0.2, 0.9));
        let h = crate::lie::exp_map(&AlgebraElement::su2(-0.7, 0.3, 0.1));
        let v = CVector::from_vec(vec![Complex::new(0.3, 0.1), Complex::new(-1.0, 0.5)]);
        let lhs = rep.apply(&(&g * &h), &v).unwrap();
        let rhs = rep.apply(&g, &rep.apply(&h, &v).unwrap()).unwrap();
        assert!((lhs - &rhs).norm() < 1e-12);
        assert!((rep.apply(&GroupElement::identity(spec), &v).unwrap() - &v).norm() == 0.0);
        assert!((rhs.norm() - v.norm()).abs() < 1e-12);
        let det = Representation::determinant(spec);
        let d = det.apply(&g, &CVector::from_element(1, Complex::new(1.0, 0.0))).unwrap();
        assert!((d[0] - Complex::new(1.0, 0.0)).norm() < 1e-12);
        let bad = rep.apply(&g, &CVector::zeros(3));
        assert!(matches!(bad, Err(Error::DimensionMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn equator_transport_negates_vectors() {
        let c = presets::monopole(1.0);
        let rep = Representation::defining(GroupSpec::u1());
        let v = CVector::from_element(1, Complex::new(0.6, -0.8));
        let out = transport_vector(&c, &rep, &Path::equator(), &v, &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert!((out + &v).norm() < 1e-6);
    }

    #[test]
    fn trivial_constant_section_is_flat() {
        let c = presets::trivial();
        let rep = Representation::defining(GroupSpec::u1());
        let v = CVector::from_element(1, Complex::new(1.0, 0.0));
        let pts = [sphere_point(0.4, 0.0), sphere_point(1.5, 1.0), sphere_point(2.6, -2.0)];
        let mut s = SectionSample::new();
        for p in pts {
            s.insert(p, v.clone());
        }
        let paths = vec![Path::great_arc(pts[0], pts[1]), Path::great_arc(pts[1], pts[2])];
        let r = check_flat_section(&c, &rep, &s, &paths, &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert!(r.pass);
        assert!(r.max_deviation < 1e-14);
    }

    #[test]
    fn gauge_transported_section_is_flat() {
        let c = presets::pure_gauge_su2();
        let g = presets::pure_gauge_function();
        let rep = Representation::defining(GroupSpec::su2());
        let v0 = CVector::from_vec(vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.5)]);
        let pts = [
            Vector3::new(-1.2, -0.9, 0.0),
            Vector3::new(0.8, -1.1, 0.0),
            Vector3::new(1.1, 1.3, 0.0),
            Vector3::new(-0.7, 0.9, 0.0),
        ];
        let mut s = SectionSample::new();
        for p in pts {
            s.insert(p, rep.apply(&g.eval(&p).unwrap(), &v0).unwrap());
        }
        let paths: Vec<Path> = (0..4).map(|k| Path::segment(pts[k], pts[(k + 1) % 4])).collect();
        let r = check_flat_section(&c, &rep, &s, &paths, &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert!(r.pass, "{}", r.max_deviation);
    }

    #[test]
    fn monopole_has_no_flat_section_on_the_equator() {
        let c = presets::monopole(1.0);
        let rep = Representation::defining(GroupSpec::u1());
        let mut s = SectionSample::new();
        let x = sphere_point(PI / 2.0, 0.0);
        s.insert(x, CVector::from_element(1, Complex::new(1.0, 0.0)));
        let r = check_flat_section(&c, &rep, &s, &[Path::equator()], &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert!(!r.pass);
        assert!((r.max_deviation - 2.0).abs() < 1e-6);
        let missing = check_flat_section(&c, &rep, &s, &[Path::latitude(1.0, 0.0)], &AnchorChoice::max_clearance(), &cfg());
        assert!(matches!(missing, Err(Error::MissingSample)));
    }

    #[test]
    fn small_loop_recovers_monopole_curvature() {
        let k = 1.0;
        let c = presets::monopole(k);
        let p = sphere_point(PI / 2.0, 0.3);
        let (v, w) = sphere_coordinate_fields(&p);
        let anchors = AnchorChoice::prefer(0);
        let err = |eps: f64| {
            let r = small_loop_curvature(&c, 0, &p, &v, &w, eps, &anchors, &cfg()).unwrap();
            (r.estimate.mat()[(0, 0)] - Complex::new(0.0, 0.5 * k)).norm()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-3, "{e1}");
        assert!((e1 / e2).log2() >= 1.8, "{e1} {e2}");
    }

    #[test]
    fn small_loop_of_flat_connections_vanishes() {
        let c = presets::pure_gauge_su2();
        let p = Vector3::new(0.7, 0.6, 0.0);
        let r = small_loop_curvature(&c, 3, &p, &Vector3::x(), &Vector3::y(), 1e-2, &AnchorChoice::prefer(3), &cfg()).unwrap();
        assert!(r.estimate.norm() < 1e-4, "{}", r.estimate.norm());
        let z = presets::trivial();
        let q = sphere_point(1.0, 0.2);
        let (v, w) = sphere_coordinate_fields(&q);
        let r = small_loop_curvature(&z, 0, &q, &v, &w, 1e-2, &AnchorChoice::max_clearance(), &cfg()).unwrap();
        assert_eq!(r.estimate.norm(), 0.0);
    }

    #[test]
    fn chern_numbers_of_the_presets() {
        assert!(chern_number(&presets::trivial()).unwrap().abs() < 1e-3);
        for k in [1.0, 3.0] {
            let n = chern_number(&presets::monopole(k)).unwrap();
            assert!((n - k).abs() < 1e-3, "{n}");
        }
        let corrupt = chern_number(&presets::monopole_corrupt()).unwrap();
        assert!((corrupt - corrupt.round()).abs() > 0.2, "{corrupt}");
        assert!(matches!(chern_number(&presets::su2_poly_bench()), Err(Error::UnsupportedGroup(_))));
    }

    #[test]
    fn chern_grid_rejects_non_cap_covers() {
        let c = presets::trivial();
        let plane = DifferentialCocycle::new(
            Cover::plane_single(),
            GroupSpec::u1(),
            vec![crate::connection::LocalConnectionForm::zero(
                crate::connection::Domain::Set(Cover::plane_single().sets()[0].clone()),
                GroupSpec::u1(),
            )],
            Default::default(),
        )
        .unwrap();
        assert!(chern_number(&c).is_ok());
        assert!(matches!(chern_number(&plane), Err(Error::UnsupportedGroup(_))));
    }

    #[test]
    fn neumaier_sum_is_compensated() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(values), 2.0);
    }
}
