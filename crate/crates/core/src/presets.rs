//! Catalog of connection forms, gauge functions and cocycles used by scenes
//! and tests.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::Rng;

use crate::connection::{gauge_transform, Domain, GaugeFunction, LocalConnectionForm};
use crate::descent::DifferentialCocycle;
use crate::error::{Error, Result};
use crate::geometry::{Cover, CoverSet, Manifold, Point, Region, Tangent};
use crate::lie::{exp_map, GroupSpec};
use crate::{AlgebraElement, GroupElement};

/// Number of monomials of degree at most two in `(x, y, z)`.
pub const MONOMIALS: usize = 10;

/// Coefficients of `1, x, y, z, xx, xy, xz, yy, yz, zz`.
pub type Poly = [f64; MONOMIALS];

/// `coeffs[a][mu]` multiplies `basis_a dx^mu`.
pub type FormCoeffs = Vec<[Poly; 3]>;

/// `coeffs[a]` multiplies `basis_a` in the exponent.
pub type GaugeCoeffs = Vec<Poly>;

pub fn monomials(p: &Point) -> Poly {
    let (x, y, z) = (p.x, p.y, p.z);
    [1.0, x, y, z, x * x, x * y, x * z, y * y, y * z, z * z]
}

pub fn poly_eval(c: &Poly, m: &Poly) -> f64 {
    c.iter().zip(m).map(|(a, b)| a * b).sum()
}

fn check_len(spec: GroupSpec, got: usize) -> Result<()> {
    let expected = spec.algebra_basis::<f64>().len();
    if got != expected {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Azimuth `atan2(y, x)`.
pub fn azimuth(p: &Point) -> f64 {
    p.y.atan2(p.x)
}

/// `x v_y - y v_x`, i.e. `(x^2 + y^2) dphi(v)`.
fn swirl(p: &Point, v: &Tangent) -> f64 {
    p.x * v.y - p.y * v.x
}

/// Charge-`k` monopole potential on a polar cap:
/// `i (k/2) (1 - cos theta) dphi` on the north cap and
/// `-i (k/2) (1 + cos theta) dphi` on the south cap.
pub fn monopole_form(set: CoverSet, k: f64) -> LocalConnectionForm {
    let north = !matches!(set.region(), Region::Cap { north: false, .. });
    LocalConnectionForm::new(Domain::Set(set), GroupSpec::u1(), move |p, v| {
        let c = if north {
            0.5 * k / (1.0 + p.z)
        } else {
            -0.5 * k / (1.0 - p.z)
        };
        Ok(AlgebraElement::u1(c * swirl(p, v)))
    })
}

/// `e^{i k phi}`, the transition from the north to the south cap.
pub fn monopole_phase(domain: Domain, k: f64) -> GaugeFunction {
    GaugeFunction::new(domain, GroupSpec::u1(), move |p| {
        Ok(GroupElement::u1_phase(k * azimuth(p)))
    })
}

/// `X (c . v)`.
pub fn constant_form(domain: Domain, x: AlgebraElement, covector: Tangent) -> LocalConnectionForm {
    let spec = x.spec();
    LocalConnectionForm::new(domain, spec, move |_, v| Ok(x.scale(covector.dot(v))))
}

/// `sum_a sum_mu P_{a mu}(p) v^mu basis_a`.
pub fn polynomial_form(domain: Domain, spec: GroupSpec, coeffs: &FormCoeffs) -> Result<LocalConnectionForm> {
    check_len(spec, coeffs.len())?;
    let coeffs = coeffs.clone();
    Ok(LocalConnectionForm::new(domain, spec, move |p, v| {
        let m = monomials(p);
        let coords: Vec<f64> = coeffs
            .iter()
            .map(|row| (0..3).map(|mu| poly_eval(&row[mu], &m) * v[mu]).sum())
            .collect();
        Ok(AlgebraElement::from_coords(spec, &coords))
    }))
}

/// `exp(sum_a P_a(p) basis_a)`.
pub fn exp_poly_gauge(domain: Domain, spec: GroupSpec, coeffs: &GaugeCoeffs) -> Result<GaugeFunction> {
    check_len(spec, coeffs.len())?;
    let coeffs = coeffs.clone();
    Ok(GaugeFunction::new(domain, spec, move |p| {
        let m = monomials(p);
        let coords: Vec<f64> = coeffs.iter().map(|c| poly_eval(c, &m)).collect();
        Ok(exp_map(&AlgebraElement::from_coords(spec, &coords)))
    }))
}

/// `-(dg) g^-1`.
pub fn pure_gauge_form(g: &GaugeFunction) -> LocalConnectionForm {
    gauge_transform(&LocalConnectionForm::zero(g.domain().clone(), g.spec()), g)
}

/// `h_j h_i^-1`, the transition induced by local gauges.
pub fn gauge_quotient(domain: Domain, hi: &GaugeFunction, hj: &GaugeFunction) -> GaugeFunction {
    hj.product(&hi.inverse()).with_domain(domain)
}

/// Benchmark su(2) form on the plane.
pub fn su2_bench_coeffs() -> FormCoeffs {
    vec![
        [
            [0.6, 0.3, -0.2, 0.0, 0.1, 0.0, 0.0, -0.15, 0.0, 0.0],
            [-0.4, 0.1, 0.5, 0.0, 0.0, 0.2, 0.0, 0.05, 0.0, 0.0],
            [0.0; MONOMIALS],
        ],
        [
            [0.2, -0.5, 0.1, 0.0, 0.0, 0.15, 0.0, 0.1, 0.0, 0.0],
            [0.7, 0.0, -0.3, 0.0, -0.1, 0.0, 0.0, 0.2, 0.0, 0.0],
            [0.0; MONOMIALS],
        ],
        [
            [-0.3, 0.2, 0.4, 0.0, 0.05, -0.1, 0.0, 0.0, 0.0, 0.0],
            [0.5, -0.25, 0.0, 0.0, 0.1, 0.0, 0.0, -0.2, 0.0, 0.0],
            [0.0; MONOMIALS],
        ],
    ]
}

/// The gauge `exp(P(p) i sigma_y + Q(p) i sigma_z)` of the pure-gauge preset.
pub fn pure_gauge_coeffs() -> GaugeCoeffs {
    vec![
        [0.0; MONOMIALS],
        [0.3, 0.8, -0.4, 0.0, 0.2, 0.3, 0.0, -0.1, 0.0, 0.0],
        [-0.2, 0.1, 0.6, 0.0, -0.3, 0.0, 0.0, 0.25, 0.0, 0.0],
    ]
}

/// Local gauges `h_i` of the plane-grid benchmark cocycle, one per quadrant.
pub fn plane_grid_gauge_coeffs(set: usize) -> GaugeCoeffs {
    let s = set as f64;
    vec![
        [0.1 * s, 0.3, -0.1 * s, 0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0],
        [-0.2 + 0.15 * s, 0.0, 0.4, 0.0, 0.0, -0.1, 0.0, 0.05 * s, 0.0, 0.0],
        [0.3 - 0.1 * s, 0.2 * s, 0.0, 0.0, 0.0, 0.0, 0.0, -0.1, 0.0, 0.0],
    ]
}

/// Random form coefficients with entries uniform in `[-scale, scale]`,
/// restricted to the first two ambient components when `planar`.
pub fn random_form_coeffs<R: Rng>(rng: &mut R, spec: GroupSpec, scale: f64, planar: bool) -> FormCoeffs {
    let dim = spec.algebra_basis::<f64>().len();
    (0..dim)
        .map(|_| {
            let mut row = [[0.0; MONOMIALS]; 3];
            for (mu, poly) in row.iter_mut().enumerate() {
                if planar && mu == 2 {
                    continue;
                }
                for c in poly.iter_mut() {
                    *c = rng.gen_range(-scale..=scale);
                }
            }
            row
        })
        .collect()
}

pub fn random_gauge_coeffs<R: Rng>(rng: &mut R, spec: GroupSpec, scale: f64) -> GaugeCoeffs {
    let dim = spec.algebra_basis::<f64>().len();
    (0..dim)
        .map(|_| {
            let mut poly = [0.0; MONOMIALS];
            for c in poly.iter_mut() {
                *c = rng.gen_range(-scale..=scale);
            }
            poly
        })
        .collect()
}

/// Half-width of the equatorial band shared by the two caps.
pub const MONOPOLE_OVERLAP: f64 = 0.3;

/// Half-width of the bands shared by neighbouring plane quadrants.
pub const PLANE_GRID_OVERLAP: f64 = 0.25;

/// Names accepted by [`cocycle`].
pub const PRESET_NAMES: [&str; 8] = [
    "trivial",
    "monopole_k1",
    "monopole_k2",
    "monopole_k3",
    "monopole_corrupt",
    "su2_poly_bench",
    "pure_gauge_su2",
    "plane_constant",
];

fn sphere() -> Domain {
    Domain::Manifold(Manifold::sphere())
}

fn plane() -> Domain {
    Domain::Manifold(Manifold::plane())
}

/// Two caps carrying monopole forms of charge `form_k`, glued by
/// `e^{i phase_k phi}`.
pub fn monopole_pair(form_k: f64, phase_k: f64) -> DifferentialCocycle {
    let cover = Cover::two_caps(MONOPOLE_OVERLAP);
    let forms = cover.sets().iter().map(|s| monopole_form(s.clone(), form_k)).collect();
    let transitions = BTreeMap::from([((0, 1), monopole_phase(sphere(), phase_k))]);
    DifferentialCocycle::new(cover, GroupSpec::u1(), forms, transitions).expect("valid preset")
}

/// The charge-`k` monopole.
pub fn monopole(k: f64) -> DifferentialCocycle {
    monopole_pair(k, k)
}

/// Half-integer charge forms glued by the charge-one phase: the forms
/// disagree with the transition by `i dphi / 2` on the overlap.
pub fn monopole_corrupt() -> DifferentialCocycle {
    monopole_pair(1.5, 1.0)
}

/// Zero u(1) forms on the two caps with identity transition.
pub fn trivial() -> DifferentialCocycle {
    let cover = Cover::two_caps(MONOPOLE_OVERLAP);
    let forms = cover
        .sets()
        .iter()
        .map(|s| LocalConnectionForm::zero(Domain::Set(s.clone()), GroupSpec::u1()))
        .collect();
    let transitions = BTreeMap::from([((0, 1), GaugeFunction::identity(sphere(), GroupSpec::u1()))]);
    DifferentialCocycle::new(cover, GroupSpec::u1(), forms, transitions).expect("valid preset")
}

/// Local gauges `h_i` of the plane-grid benchmark.
pub fn plane_grid_gauges(cover: &Cover, spec: GroupSpec, keep: &[usize]) -> Vec<GaugeFunction> {
    cover
        .sets()
        .iter()
        .map(|s| {
            let coeffs = mask_gauge(plane_grid_gauge_coeffs(s.id()), keep);
            exp_poly_gauge(Domain::Set(s.clone()), spec, &coeffs).expect("valid preset")
        })
        .collect()
}

fn mask_form(mut c: FormCoeffs, keep: &[usize]) -> FormCoeffs {
    for (a, row) in c.iter_mut().enumerate() {
        if !keep.contains(&a) {
            *row = [[0.0; MONOMIALS]; 3];
        }
    }
    c
}

fn mask_gauge(mut c: GaugeCoeffs, keep: &[usize]) -> GaugeCoeffs {
    for (a, row) in c.iter_mut().enumerate() {
        if !keep.contains(&a) {
            *row = [0.0; MONOMIALS];
        }
    }
    c
}

/// Benchmark form `A` restricted to the su(2) components in `keep`, written
/// on each quadrant in the gauge `h_i`, with `g_ij = h_j h_i^-1`.
fn su2_grid(keep: &[usize]) -> DifferentialCocycle {
    let spec = GroupSpec::su2();
    let cover = Cover::plane_grid(PLANE_GRID_OVERLAP);
    let coeffs = mask_form(su2_bench_coeffs(), keep);
    let gauges = plane_grid_gauges(&cover, spec, keep);
    let forms = cover
        .sets()
        .iter()
        .zip(&gauges)
        .map(|(s, h)| {
            let a = polynomial_form(Domain::Set(s.clone()), spec, &coeffs).expect("valid preset");
            gauge_transform(&a, h)
        })
        .collect();
    let mut transitions = BTreeMap::new();
    for i in 0..cover.len() {
        for j in i + 1..cover.len() {
            transitions.insert((i, j), gauge_quotient(plane(), &gauges[i], &gauges[j]));
        }
    }
    DifferentialCocycle::new(cover, spec, forms, transitions).expect("valid preset")
}

/// Non-abelian benchmark on the four-quadrant plane cover.
pub fn su2_poly_bench() -> DifferentialCocycle {
    su2_grid(&[0, 1, 2])
}

/// The benchmark restricted to its `i sigma_z` components, a u(1) connection
/// embedded in su(2) as the diagonal torus.
pub fn su2_torus_bench() -> DifferentialCocycle {
    su2_grid(&[2])
}

/// The global gauge of [`pure_gauge_su2`].
pub fn pure_gauge_function() -> GaugeFunction {
    exp_poly_gauge(plane(), GroupSpec::su2(), &pure_gauge_coeffs()).expect("valid preset")
}

/// `A = -(dg) g^-1` on every quadrant with identity transitions.
pub fn pure_gauge_su2() -> DifferentialCocycle {
    let spec = GroupSpec::su2();
    let cover = Cover::plane_grid(PLANE_GRID_OVERLAP);
    let g = pure_gauge_function();
    let forms = cover
        .sets()
        .iter()
        .map(|s| pure_gauge_form(&g.with_domain(Domain::Set(s.clone()))))
        .collect();
    let mut transitions = BTreeMap::new();
    for i in 0..cover.len() {
        for j in i + 1..cover.len() {
            transitions.insert((i, j), GaugeFunction::identity(plane(), spec));
        }
    }
    DifferentialCocycle::new(cover, spec, forms, transitions).expect("valid preset")
}

/// Generator of [`plane_constant`].
pub fn plane_constant_generator() -> AlgebraElement {
    AlgebraElement::su2(0.5, 0.9, -0.3)
}

/// `X dx` on the plane with a single chart.
pub fn plane_constant() -> DifferentialCocycle {
    let cover = Cover::plane_single();
    let set = cover.sets()[0].clone();
    let form = constant_form(Domain::Set(set), plane_constant_generator(), Vector3::x());
    DifferentialCocycle::new(cover, GroupSpec::su2(), vec![form], BTreeMap::new()).expect("valid preset")
}

/// Cocycle preset by name.
pub fn cocycle(name: &str) -> Result<DifferentialCocycle> {
    Ok(match name {
        "trivial" => trivial(),
        "monopole_k1" => monopole(1.0),
        "monopole_k2" => monopole(2.0),
        "monopole_k3" => monopole(3.0),
        "monopole_corrupt" => monopole_corrupt(),
        "su2_poly_bench" => su2_poly_bench(),
        "su2_torus_bench" => su2_torus_bench(),
        "pure_gauge_su2" => pure_gauge_su2(),
        "plane_constant" => plane_constant(),
        other => return Err(Error::Scene(format!("unknown preset {other}"))),
    })
}
