//! Lie-algebra-valued 1-forms on cover sets, gauge transformations and
//! curvature.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{tangent, ChartPoint, CoverSet, Manifold, ManifoldKind, Path, Point, Tangent};
use crate::lie::{adjoint, right_maurer_cartan_exact, GroupSpec, MAURER_CARTAN_STEP};
use crate::{AlgebraElement, GroupElement};

/// Step of the curvature derivative stencil (chart coordinates).
pub const CURVATURE_STEP: f64 = 1e-4;

/// Where a form or gauge function is defined.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Manifold(Manifold),
    Set(CoverSet),
}

impl Domain {
    pub fn manifold(&self) -> Manifold {
        match self {
            Domain::Manifold(m) => *m,
            Domain::Set(s) => s.manifold(),
        }
    }

    pub fn set_id(&self) -> Option<usize> {
        match self {
            Domain::Manifold(_) => None,
            Domain::Set(s) => Some(s.id()),
        }
    }

    pub fn clearance(&self, p: &Point) -> f64 {
        match self {
            Domain::Manifold(_) => f64::INFINITY,
            Domain::Set(s) => s.clearance(p),
        }
    }

    fn describe(&self) -> String {
        match self {
            Domain::Manifold(m) => format!("{:?}", m.kind()),
            Domain::Set(s) => format!("set {}", s.name()),
        }
    }

    fn require(&self, p: &Point) -> Result<()> {
        if self.clearance(p) > 0.0 {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: self.describe(),
            })
        }
    }

    fn chart(&self) -> Result<ChartView<'_>> {
        match self {
            Domain::Set(s) => Ok(ChartView::Set(s)),
            Domain::Manifold(m) if m.kind() == ManifoldKind::PlaneR2 => Ok(ChartView::Plane),
            Domain::Manifold(_) => Err(Error::OutOfDomain {
                what: format!("{} has no global chart", self.describe()),
            }),
        }
    }
}

enum ChartView<'a> {
    Plane,
    Set(&'a CoverSet),
}

impl ChartView<'_> {
    fn chart(&self, p: &Point) -> ChartPoint {
        match self {
            ChartView::Plane => p.xy(),
            ChartView::Set(s) => s.chart(p),
        }
    }

    fn inverse(&self, q: &ChartPoint) -> Point {
        match self {
            ChartView::Plane => Point::new(q.x, q.y, 0.0),
            ChartView::Set(s) => s.chart_inverse(q),
        }
    }

    fn push(&self, q: &ChartPoint, w: &Vector2<f64>) -> Tangent {
        match self {
            ChartView::Plane => Tangent::new(w.x, w.y, 0.0),
            ChartView::Set(s) => s.chart_pushforward(q, w),
        }
    }

    fn differential(&self, p: &Point, v: &Tangent) -> Vector2<f64> {
        match self {
            ChartView::Plane => v.xy(),
            ChartView::Set(s) => s.chart_differential(p, v),
        }
    }
}

type FormFn = Arc<dyn Fn(&Point, &Tangent) -> Result<AlgebraElement> + Send + Sync>;
type GaugeFn = Arc<dyn Fn(&Point) -> Result<GroupElement> + Send + Sync>;

/// A g-valued 1-form, evaluated on (point, ambient tangent) pairs.
#[derive(Clone)]
pub struct LocalConnectionForm {
    domain: Domain,
    spec: GroupSpec,
    eval: FormFn,
}

impl fmt::Debug for LocalConnectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalConnectionForm")
            .field("domain", &self.domain)
            .field("spec", &self.spec)
            .finish()
    }
}

impl LocalConnectionForm {
    pub fn new<F>(domain: Domain, spec: GroupSpec, eval: F) -> Self
    where
        F: Fn(&Point, &Tangent) -> Result<AlgebraElement> + Send + Sync + 'static,
    {
        Self {
            domain,
            spec,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(domain: Domain, spec: GroupSpec) -> Self {
        Self::new(domain, spec, move |_, _| Ok(AlgebraElement::zero(spec)))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn set_id(&self) -> Option<usize> {
        self.domain.set_id()
    }

    /// `A_p(v)`. Does not check the domain; see [`Self::eval_checked`].
    pub fn eval(&self, p: &Point, v: &Tangent) -> Result<AlgebraElement> {
        (self.eval)(p, v)
    }

    pub fn eval_checked(&self, p: &Point, v: &Tangent) -> Result<AlgebraElement> {
        self.domain.require(p)?;
        (self.eval)(p, v)
    }

    /// The same evaluator on a different domain.
    pub fn with_domain(&self, domain: Domain) -> Self {
        Self {
            domain,
            spec: self.spec,
            eval: self.eval.clone(),
        }
    }

    /// Largest evaluator difference over an orthonormal tangent frame at `p`.
    pub fn distance_at(&self, other: &Self, p: &Point) -> Result<f64> {
        let mut worst = 0.0f64;
        for e in self.domain.manifold().tangent_basis(p) {
            let d = &self.eval(p, &e)? - &other.eval(p, &e)?;
            worst = worst.max(d.norm());
        }
        Ok(worst)
    }
}

/// A smooth `G`-valued function.
#[derive(Clone)]
pub struct GaugeFunction {
    domain: Domain,
    spec: GroupSpec,
    eval: GaugeFn,
}

impl fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeFunction")
            .field("domain", &self.domain)
            .field("spec", &self.spec)
            .finish()
    }
}

impl GaugeFunction {
    pub fn new<F>(domain: Domain, spec: GroupSpec, eval: F) -> Self
    where
        F: Fn(&Point) -> Result<GroupElement> + Send + Sync + 'static,
    {
        Self {
            domain,
            spec,
            eval: Arc::new(eval),
        }
    }

    pub fn identity(domain: Domain, spec: GroupSpec) -> Self {
        Self::new(domain, spec, move |_| Ok(GroupElement::identity(spec)))
    }

    pub fn constant(domain: Domain, g: GroupElement) -> Self {
        let spec = g.spec();
        Self::new(domain, spec, move |_| Ok(g.clone()))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn eval(&self, p: &Point) -> Result<GroupElement> {
        (self.eval)(p)
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        Self {
            domain,
            spec: self.spec,
            eval: self.eval.clone(),
        }
    }

    /// Pointwise product `self * other`.
    pub fn product(&self, other: &GaugeFunction) -> GaugeFunction {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self::new(self.domain.clone(), self.spec, move |p| Ok(&a(p)? * &b(p)?))
    }

    pub fn inverse(&self) -> GaugeFunction {
        let a = self.eval.clone();
        Self::new(self.domain.clone(), self.spec, move |p| Ok(a(p)?.inverse()))
    }

    /// `(g^* theta-bar)(v) = (D_v g) g^-1`, differentiating along the projected
    /// displacement `s -> g(proj(p + s v))`.
    pub fn maurer_cartan(&self, p: &Point, v: &Tangent) -> Result<AlgebraElement> {
        Ok(self.eval_with_maurer_cartan(p, v)?.1)
    }

    /// `g(p)` together with [`Self::maurer_cartan`], sharing the stencil centre.
    pub fn eval_with_maurer_cartan(&self, p: &Point, v: &Tangent) -> Result<(GroupElement, AlgebraElement)> {
        let manifold = self.domain.manifold();
        let h = MAURER_CARTAN_STEP;
        let at = |s: f64| self.eval(&manifold.project(&(p + v * s)));
        let g0 = self.eval(p)?;
        let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
        let dg = ((p1.mat() - m1.mat()) * Complex::new(8.0, 0.0) - (p2.mat() - m2.mat())) / Complex::new(12.0 * h, 0.0);
        let mc = right_maurer_cartan_exact(&g0, &dg);
        Ok((g0, mc))
    }
}

/// `t -> A_{gamma(t)}(gamma'(t))`.
pub struct Pullback<'a> {
    form: &'a LocalConnectionForm,
    path: &'a Path,
}

impl Pullback<'_> {
    pub fn eval(&self, t: f64) -> Result<AlgebraElement> {
        let v = tangent(self.path, t);
        if v == Tangent::zeros() {
            return Ok(AlgebraElement::zero(self.form.spec));
        }
        self.form.eval(&self.path.at(t), &v)
    }
}

/// Checks that `path` restricted to `[t0, t1]` stays in the form's domain.
pub fn check_path_in_domain(form: &LocalConnectionForm, path: &Path, t0: f64, t1: f64) -> Result<()> {
    for t in path.sample_params(t0, t1) {
        form.domain.require(&path.at(t))?;
    }
    Ok(())
}

/// Pullback of `form` along `path`.
pub fn pullback_1form<'a>(form: &'a LocalConnectionForm, path: &'a Path) -> Result<Pullback<'a>> {
    check_path_in_domain(form, path, 0.0, 1.0)?;
    Ok(Pullback { form, path })
}

/// `A' = Ad_g(A) - g^* theta-bar`.
pub fn gauge_transform(form: &LocalConnectionForm, g: &GaugeFunction) -> LocalConnectionForm {
    let a = form.clone();
    let g = g.clone();
    LocalConnectionForm::new(form.domain.clone(), form.spec, move |p, v| {
        let (gp, mc) = g.eval_with_maurer_cartan(p, v)?;
        Ok(&adjoint(&gp, &a.eval(p, v)?) - &mc)
    })
}

/// Curvature `K(v, w) = D_v A(w) - D_w A(v) + [A(v), A(w)]`.
///
/// The vectors are extended as chart-constant fields of the form's chart, so
/// their bracket vanishes; the directional derivatives are central
/// differences with one Richardson step.
pub fn curvature(form: &LocalConnectionForm, p: &Point, v: &Tangent, w: &Tangent) -> Result<AlgebraElement> {
    form.domain.require(p)?;
    let chart = form.domain.chart()?;
    let q0 = chart.chart(p);
    let cv = chart.differential(p, v);
    let cw = chart.differential(p, w);
    let field = |q: &ChartPoint, dir: &Vector2<f64>| form.eval(&chart.inverse(q), &chart.push(q, dir));
    let derivative = |along: &Vector2<f64>, of: &Vector2<f64>| -> Result<AlgebraElement> {
        let central = |h: f64| -> Result<AlgebraElement> {
            let plus = field(&(q0 + along * h), of)?;
            let minus = field(&(q0 - along * h), of)?;
            Ok((&plus - &minus).scale(0.5 / h))
        };
        let coarse = central(CURVATURE_STEP)?;
        let fine = central(0.5 * CURVATURE_STEP)?;
        Ok((&fine.scale(4.0) - &coarse).scale(1.0 / 3.0))
    };
    let dvw = derivative(&cv, &cw)?;
    let dwv = derivative(&cw, &cv)?;
    let av = form.eval(p, v)?;
    let aw = form.eval(p, w)?;
    Ok(&(&dvw - &dwv) + &av.bracket(&aw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sphere_coordinate_fields, sphere_point, Cover};
    use crate::lie::exp_map;
    use crate::presets;
    use nalgebra::Vector3;

    fn plane() -> Domain {
        Domain::Manifold(Manifold::plane())
    }

    #[test]
    fn zero_form_pulls_back_to_zero() {
        let a = LocalConnectionForm::zero(plane(), GroupSpec::su2());
        let g = Path::segment(Vector3::zeros(), Vector3::new(1.0, 2.0, 0.0));
        let pb = pullback_1form(&a, &g).unwrap();
        for t in [0.0, 0.3, 0.8] {
            assert_eq!(pb.eval(t).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn constant_form_pullback_is_scaled_by_core_speed() {
        let x = AlgebraElement::su2(0.3, -0.7, 0.2);
        let a = presets::constant_form(plane(), x.clone(), Vector3::x());
        let g = Path::segment(Vector3::zeros(), Vector3::x());
        let pb = pullback_1form(&a, &g).unwrap();
        for t in [0.05, 0.3, 0.5, 0.77] {
            let speed = crate::geometry::path::sitting_wrap_speed(t, 0.1);
            assert!((&pb.eval(t).unwrap() - &x.scale(speed)).norm() < 1e-8);
        }
    }

    #[test]
    fn monopole_pullback_along_a_latitude() {
        let cover = Cover::two_caps(0.3);
        let k = 1.0;
        let a = presets::monopole_form(cover.sets()[0].clone(), k);
        let theta = 1.1;
        let g = Path::latitude(theta, 0.0);
        let pb = pullback_1form(&a, &g).unwrap();
        for t in [0.2, 0.5, 0.66] {
            let speed = std::f64::consts::TAU * crate::geometry::path::sitting_wrap_speed(t, 0.1);
            let expected = AlgebraElement::u1(0.5 * k * (1.0 - theta.cos()) * speed);
            assert!((&pb.eval(t).unwrap() - &expected).norm() < 1e-8);
        }
        let outside = Path::latitude(2.5, 0.0);
        assert!(matches!(pullback_1form(&a, &outside), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn forms_are_linear_in_the_tangent() {
        let cover = Cover::two_caps(0.3);
        let a = presets::monopole_form(cover.sets()[1].clone(), 2.0);
        let p = sphere_point(2.0, 0.7);
        let basis = Manifold::sphere().tangent_basis(&p);
        let (v, w) = (basis[0], basis[1]);
        let lhs = a.eval(&p, &(v * 0.3 + w * -1.7)).unwrap();
        let rhs = &a.eval(&p, &v).unwrap().scale(0.3) + &a.eval(&p, &w).unwrap().scale(-1.7);
        assert!((&lhs - &rhs).norm() < 1e-9);
    }

    #[test]
    fn constant_gauge_is_conjugation() {
        let x = AlgebraElement::su2(0.3, 0.1, -0.4);
        let a = presets::constant_form(plane(), x.clone(), Vector3::y());
        let g0 = exp_map(&AlgebraElement::su2(0.5, 0.2, 0.9));
        let b = gauge_transform(&a, &GaugeFunction::constant(plane(), g0.clone()));
        let p = Vector3::new(0.2, 0.4, 0.0);
        let v = Vector3::new(0.3, 1.1, 0.0);
        let expected = adjoint(&g0, &x.scale(1.1));
        assert!((&b.eval(&p, &v).unwrap() - &expected).norm() < 1e-12);
    }

    #[test]
    fn abelian_gauge_subtracts_the_differential() {
        // A = i a(p) dx, g = e^{i phi(p)}, phi = x^2 y + sin y.
        let a = LocalConnectionForm::new(plane(), GroupSpec::u1(), |p, v| {
            Ok(AlgebraElement::u1((1.0 + p.y * p.y) * v.x))
        });
        let phi = |p: &Point| p.x * p.x * p.y + p.y.sin();
        let g = GaugeFunction::new(plane(), GroupSpec::u1(), move |p| Ok(GroupElement::u1_phase(phi(p))));
        let b = gauge_transform(&a, &g);
        let p = Vector3::new(0.4, -0.3, 0.0);
        let v = Vector3::new(0.6, 0.8, 0.0);
        let h = 1e-6;
        let dphi = (phi(&(p + v * h)) - phi(&(p - v * h))) / (2.0 * h);
        let expected = &a.eval(&p, &v).unwrap() - &AlgebraElement::u1(dphi);
        assert!((&b.eval(&p, &v).unwrap() - &expected).norm() < 1e-8);
    }

    #[test]
    fn identity_gauge_is_identity_on_forms() {
        let a = presets::polynomial_form(plane(), GroupSpec::su2(), &presets::su2_bench_coeffs()).unwrap();
        let b = gauge_transform(&a, &GaugeFunction::identity(plane(), GroupSpec::su2()));
        let p = Vector3::new(-0.3, 0.9, 0.0);
        assert!(a.distance_at(&b, &p).unwrap() < 1e-12);
    }

    #[test]
    fn curvature_of_zero_form_vanishes() {
        let a = LocalConnectionForm::zero(plane(), GroupSpec::su2());
        let k = curvature(&a, &Vector3::zeros(), &Vector3::x(), &Vector3::y()).unwrap();
        assert_eq!(k.norm(), 0.0);
    }

    #[test]
    fn monopole_curvature_matches_closed_form() {
        let cover = Cover::two_caps(0.3);
        for (set, theta) in [(0, 0.7), (0, 1.6), (1, 1.9), (1, 2.8)] {
            let k = 3.0;
            let a = presets::monopole_form(cover.sets()[set].clone(), k);
            let p = sphere_point(theta, -1.2);
            let (dt, dp) = sphere_coordinate_fields(&p);
            let curv = curvature(&a, &p, &dt, &dp).unwrap();
            let expected = AlgebraElement::u1(0.5 * k * theta.sin());
            assert!((&curv - &expected).norm() < 1e-6, "set {set} theta {theta}");
        }
    }

    #[test]
    fn pure_gauge_is_flat() {
        let g = presets::exp_poly_gauge(plane(), GroupSpec::su2(), &presets::pure_gauge_coeffs()).unwrap();
        let a = gauge_transform(&LocalConnectionForm::zero(plane(), GroupSpec::su2()), &g);
        for p in [Vector3::new(0.1, 0.2, 0.0), Vector3::new(-0.8, 0.5, 0.0)] {
            let k = curvature(&a, &p, &Vector3::x(), &Vector3::y()).unwrap();
            assert!(k.norm() < 1e-5, "{}", k.norm());
        }
    }

    #[test]
    fn curvature_is_gauge_covariant() {
        let a = presets::polynomial_form(plane(), GroupSpec::su2(), &presets::su2_bench_coeffs()).unwrap();
        let g = presets::exp_poly_gauge(plane(), GroupSpec::su2(), &presets::pure_gauge_coeffs()).unwrap();
        let b = gauge_transform(&a, &g);
        for p in [Vector3::new(0.3, -0.2, 0.0), Vector3::new(-0.6, 0.7, 0.0)] {
            let (v, w) = (Vector3::new(1.0, 0.3, 0.0), Vector3::new(-0.2, 0.9, 0.0));
            let ka = curvature(&a, &p, &v, &w).unwrap();
            let kb = curvature(&b, &p, &v, &w).unwrap();
            let expected = adjoint(&g.eval(&p).unwrap(), &ka);
            assert!((&kb - &expected).norm() < 1e-5, "{}", (&kb - &expected).norm());
        }
    }

    #[test]
    fn gauge_transforms_compose() {
        let a = presets::polynomial_form(plane(), GroupSpec::su2(), &presets::su2_bench_coeffs()).unwrap();
        let g = presets::exp_poly_gauge(plane(), GroupSpec::su2(), &presets::pure_gauge_coeffs()).unwrap();
        let h = presets::exp_poly_gauge(plane(), GroupSpec::su2(), &presets::plane_grid_gauge_coeffs(2)).unwrap();
        let twice = gauge_transform(&gauge_transform(&a, &g), &h);
        let once = gauge_transform(&a, &h.product(&g));
        for p in [Vector3::new(0.3, -0.2, 0.0), Vector3::new(1.1, 0.4, 0.0)] {
            assert!(twice.distance_at(&once, &p).unwrap() < 1e-6);
        }
    }
}
