//! Path-ordered exponentials `u' = -a(t) u`, local transport `k_A`, and the
//! inverse map from transport back to a 1-form.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::connection::{check_path_in_domain, gauge_transform, pullback_1form, GaugeFunction, LocalConnectionForm};
use crate::error::{Error, Result};
use crate::geometry::{tangent, Manifold, Path, Point, Tangent};
use crate::lie::{self, lit, op_norm, repair_to_group, to_f64, CMatrix, GroupSpec, Real};
use crate::{AlgebraElement, GroupElement};

/// Number of RK4 steps between two group repairs.
pub const REPAIR_INTERVAL: usize = 16;

/// Step of the difference quotient in [`recover_form`].
pub const RECOVER_STEP: f64 = 1e-3;

/// Fixed-step RK4 with step doubling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSolverConfig")]
pub struct SolverConfig {
    base_steps: usize,
    tol: f64,
    max_refinements: usize,
}

#[derive(Deserialize)]
#[serde(default)]
struct RawSolverConfig {
    base_steps: usize,
    tol: f64,
    max_refinements: usize,
}

impl Default for RawSolverConfig {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            base_steps: c.base_steps,
            tol: c.tol,
            max_refinements: c.max_refinements,
        }
    }
}

impl TryFrom<RawSolverConfig> for SolverConfig {
    type Error = Error;

    fn try_from(raw: RawSolverConfig) -> Result<Self> {
        SolverConfig::new(raw.base_steps, raw.tol, raw.max_refinements)
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            base_steps: 256,
            tol: 1e-9,
            max_refinements: 8,
        }
    }
}

impl SolverConfig {
    pub fn new(base_steps: usize, tol: f64, max_refinements: usize) -> Result<Self> {
        if base_steps < 16 {
            return Err(Error::InvalidConfig(format!("base_steps = {base_steps} < 16")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol = {tol} must be positive")));
        }
        Ok(Self {
            base_steps,
            tol,
            max_refinements,
        })
    }

    pub fn base_steps(&self) -> usize {
        self.base_steps
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_refinements(&self) -> usize {
        self.max_refinements
    }

    pub fn with_tol(self, tol: f64) -> Result<Self> {
        Self::new(self.base_steps, tol, self.max_refinements)
    }

    pub fn with_base_steps(self, base_steps: usize) -> Result<Self> {
        Self::new(base_steps, self.tol, self.max_refinements)
    }
}

/// `u(t1)` together with its step-doubling error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult<T: Real = f64> {
    pub value: lie::GroupElement<T>,
    pub estimated_error: T,
    pub steps_used: usize,
}

/// Generator samples at `t0 + k (t1 - t0) / (2n)`, `k = 0..=2n`.
struct Samples<T: Real> {
    n: usize,
    vals: Vec<CMatrix<T>>,
}

impl<T: Real> Samples<T> {
    fn new<F>(a: &F, t0: T, t1: T, n: usize) -> Result<Self>
    where
        F: Fn(T) -> Result<lie::AlgebraElement<T>>,
    {
        let vals = (0..=2 * n)
            .map(|k| Ok(a(node(t0, t1, k, 2 * n))?.mat().clone()))
            .collect::<Result<_>>()?;
        Ok(Self { n, vals })
    }

    fn refine<F>(&self, a: &F, t0: T, t1: T) -> Result<Self>
    where
        F: Fn(T) -> Result<lie::AlgebraElement<T>>,
    {
        let n = 2 * self.n;
        let mut vals = Vec::with_capacity(2 * n + 1);
        for (k, v) in self.vals.iter().enumerate() {
            if k > 0 {
                vals.push(a(node(t0, t1, 2 * k - 1, 2 * n))?.mat().clone());
            }
            vals.push(v.clone());
        }
        Ok(Self { n, vals })
    }
}

fn node<T: Real>(t0: T, t1: T, k: usize, m: usize) -> T {
    if k == m {
        return t1;
    }
    t0 + (t1 - t0) * lit::<T>(k as f64 / m as f64)
}

fn scalar<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn rk4_on_samples<T: Real>(s: &Samples<T>, spec: GroupSpec, t0: T, t1: T) -> Result<CMatrix<T>> {
    let n = spec.n();
    let h = (t1 - t0) / lit::<T>(s.n as f64);
    let half_h = scalar(h * lit::<T>(0.5));
    let sixth_h = scalar(h / lit::<T>(6.0));
    let two = scalar(lit::<T>(2.0));
    let mut u = CMatrix::<T>::identity(n, n);
    for j in 0..s.n {
        let (a0, am, a1) = (&s.vals[2 * j], &s.vals[2 * j + 1], &s.vals[2 * j + 2]);
        let k1 = -(a0 * &u);
        let k2 = -(am * (&u + &k1 * half_h));
        let k3 = -(am * (&u + &k2 * half_h));
        let k4 = -(a1 * (&u + &k3 * scalar(h)));
        u += (k1 + (k2 + k3) * two + k4) * sixth_h;
        if (j + 1) % REPAIR_INTERVAL == 0 && j + 1 < s.n {
            u = repair_to_group(&u, spec)?.into_mat();
        }
    }
    Ok(repair_to_group(&u, spec)?.into_mat())
}

/// RK4 with exactly `steps` steps and no error control.
pub fn rk4_fixed<T, F>(a: F, spec: GroupSpec, t0: T, t1: T, steps: usize) -> Result<lie::GroupElement<T>>
where
    T: Real,
    F: Fn(T) -> Result<lie::AlgebraElement<T>>,
{
    let s = Samples::new(&a, t0, t1, steps.max(1))?;
    rk4_on_samples(&s, spec, t0, t1).map(|m| lie::GroupElement::from_matrix_unchecked(spec, m))
}

/// Solves `u' = -a(t) u`, `u(t0) = I` and returns `u(t1)`.
///
/// Runs `N` and `2N` steps starting from `cfg.base_steps`, doubling until
/// `|u_2N - u_N|_F / 15 <= tol`. `t1 < t0` integrates backwards.
pub fn path_ordered_exp<T, F>(a: F, spec: GroupSpec, t0: T, t1: T, cfg: &SolverConfig) -> Result<TransportResult<T>>
where
    T: Real,
    F: Fn(T) -> Result<lie::AlgebraElement<T>>,
{
    let tol: T = lit(cfg.tol);
    let mut coarse_samples = Samples::new(&a, t0, t1, cfg.base_steps)?;
    let mut coarse = rk4_on_samples(&coarse_samples, spec, t0, t1);
    let mut achieved = f64::INFINITY;
    for _ in 0..=cfg.max_refinements {
        let fine_samples = coarse_samples.refine(&a, t0, t1)?;
        let fine = rk4_on_samples(&fine_samples, spec, t0, t1);
        if let (Ok(c), Ok(f)) = (&coarse, &fine) {
            let est = (f - c).norm() / lit::<T>(15.0);
            if est <= tol {
                return Ok(TransportResult {
                    value: lie::GroupElement::from_matrix_unchecked(spec, f.clone()),
                    estimated_error: est,
                    steps_used: fine_samples.n,
                });
            }
            achieved = to_f64(est);
        }
        coarse_samples = fine_samples;
        coarse = fine;
    }
    Err(Error::ToleranceNotReached {
        tol: cfg.tol,
        achieved,
    })
}

/// `k_A(gamma)`: the path-ordered exponential of the pullback on `[0, 1]`.
pub fn transport_local(form: &LocalConnectionForm, path: &Path, cfg: &SolverConfig) -> Result<TransportResult> {
    transport_local_range(form, path, 0.0, 1.0, cfg)
}

/// Transport along `path` restricted to `[t0, t1]`.
pub fn transport_local_range(
    form: &LocalConnectionForm,
    path: &Path,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<TransportResult> {
    check_path_in_domain(form, path, t0.min(t1), t0.max(t1))?;
    let spec = form.spec();
    if t0 == t1 {
        return Ok(TransportResult {
            value: GroupElement::identity(spec),
            estimated_error: 0.0,
            steps_used: 0,
        });
    }
    let a = |t: f64| -> Result<AlgebraElement> {
        let v = tangent(path, t);
        if v == Tangent::zeros() {
            return Ok(AlgebraElement::zero(spec));
        }
        form.eval(&path.at(t), &v)
    };
    path_ordered_exp(a, spec, t0, t1, cfg)
}

/// `|f(y, z) f(x, y) - f(x, z)|` in operator norm.
pub fn check_cocycle_identity<T, F>(a: F, spec: GroupSpec, x: T, y: T, z: T, cfg: &SolverConfig) -> Result<T>
where
    T: Real,
    F: Fn(T) -> Result<lie::AlgebraElement<T>>,
{
    let fxy = path_ordered_exp(&a, spec, x, y, cfg)?.value;
    let fyz = path_ordered_exp(&a, spec, y, z, cfg)?.value;
    let fxz = path_ordered_exp(&a, spec, x, z, cfg)?.value;
    Ok(op_norm(&(&(fyz * fxy).into_mat() - fxz.mat())))
}

/// `|g(gamma(1)) k_A(gamma) - k_{A'}(gamma) g(gamma(0))|` with `A'` the gauge
/// transform of `A` by `g`.
pub fn check_gauge_covariance(
    form: &LocalConnectionForm,
    g: &GaugeFunction,
    path: &Path,
    cfg: &SolverConfig,
) -> Result<f64> {
    pullback_1form(form, path)?;
    let transformed = gauge_transform(form, g);
    let k = transport_local(form, path, cfg)?.value;
    let k2 = transport_local(&transformed, path, cfg)?.value;
    let lhs = &g.eval(&path.end())? * &k;
    let rhs = &k2 * &g.eval(&path.start())?;
    Ok(op_norm(&(lhs.mat() - rhs.mat())))
}

/// Anything that assigns a group element to a path.
pub trait TransportOracle: Send + Sync {
    fn spec(&self) -> GroupSpec;
    fn transport(&self, path: &Path) -> Result<GroupElement>;
}

/// `k_A` of a single local form.
pub struct LocalTransport {
    pub form: LocalConnectionForm,
    pub cfg: SolverConfig,
}

impl TransportOracle for LocalTransport {
    fn spec(&self) -> GroupSpec {
        self.form.spec()
    }

    fn transport(&self, path: &Path) -> Result<GroupElement> {
        Ok(transport_local(&self.form, path, &self.cfg)?.value)
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F> {
    spec: GroupSpec,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&Path) -> Result<GroupElement> + Send + Sync,
{
    pub fn new(spec: GroupSpec, f: F) -> Self {
        Self { spec, f }
    }
}

impl<F> TransportOracle for FnOracle<F>
where
    F: Fn(&Path) -> Result<GroupElement> + Send + Sync,
{
    fn spec(&self) -> GroupSpec {
        self.spec
    }

    fn transport(&self, path: &Path) -> Result<GroupElement> {
        (self.f)(path)
    }
}

/// `A_p(v) = -d/dt F(Gamma|[0,t])` at `t = 0` along `Gamma(t) = proj(p + t v)`.
pub fn recover_form(oracle: &dyn TransportOracle, manifold: Manifold, p: &Point, v: &Tangent) -> Result<AlgebraElement> {
    let (p, v) = (*p, *v);
    recover_form_along(oracle, move |t| manifold.project(&(p + v * t)))
}

/// [`recover_form`] along a caller-supplied curve with `curve(0) = p` and
/// `curve'(0) = v`.
pub fn recover_form_along<C>(oracle: &dyn TransportOracle, curve: C) -> Result<AlgebraElement>
where
    C: Fn(f64) -> Point + Send + Sync + Clone + 'static,
{
    let d = richardson_derivative(|t: f64| {
        let c = curve.clone();
        Ok(oracle.transport(&Path::from_core(move |s| c(s * t)))?.into_mat())
    })?;
    Ok(AlgebraElement::project(oracle.spec(), &(-d)))
}

/// `f'(0)` from central differences at [`RECOVER_STEP`] and half of it,
/// combined by one Richardson step.
pub fn richardson_derivative<F>(f: F) -> Result<CMatrix<f64>>
where
    F: Fn(f64) -> Result<CMatrix<f64>>,
{
    let central = |h: f64| -> Result<CMatrix<f64>> { Ok((f(h)? - f(-h)?) / Complex::new(2.0 * h, 0.0)) };
    let coarse = central(RECOVER_STEP)?;
    let fine = central(0.5 * RECOVER_STEP)?;
    Ok((fine * Complex::new(4.0, 0.0) - coarse) / Complex::new(3.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::Domain;
    use crate::geometry::{sphere_coordinate_fields, sphere_point, Cover};
    use crate::lie::exp_map;
    use crate::presets;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn plane() -> Domain {
        Domain::Manifold(Manifold::plane())
    }

    fn su2_poly(t: f64) -> Result<AlgebraElement> {
        Ok(AlgebraElement::su2(
            0.8 + 1.5 * t - t * t,
            -0.6 * t + 2.0 * t * t * t,
            1.2 - 0.7 * t,
        ))
    }

    #[test]
    fn config_is_validated() {
        assert!(SolverConfig::new(8, 1e-9, 8).is_err());
        assert!(SolverConfig::new(64, 0.0, 8).is_err());
        let c: SolverConfig = serde_json::from_str(r#"{"tol": 1e-10}"#).unwrap();
        assert_eq!(c.base_steps(), 256);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"base_steps": 4}"#).is_err());
    }

    #[test]
    fn zero_generator_gives_identity_exactly() {
        let r = path_ordered_exp(|_| Ok(AlgebraElement::zero(GroupSpec::su2())), GroupSpec::su2(), 0.0, 1.0, &cfg())
            .unwrap();
        assert_eq!(r.estimated_error, 0.0);
        assert_eq!(r.value.distance_to_identity(), 0.0);
    }

    #[test]
    fn constant_generator_is_an_exponential() {
        let x = AlgebraElement::su2(0.7, -1.1, 0.4);
        let r = path_ordered_exp(|_| Ok(x.clone()), GroupSpec::su2(), 0.0, 1.0, &cfg()).unwrap();
        assert!(r.value.distance(&exp_map(&x.scale(-1.0))) < 1e-9);
        assert!(r.estimated_error <= 1e-9);
    }

    #[test]
    fn abelian_generator_integrates() {
        // c(t) = 3 cos(5t) + t^2, integral over [0,1] = 3 sin(5)/5 + 1/3
        let c = |t: f64| 3.0 * (5.0 * t).cos() + t * t;
        let r = path_ordered_exp(|t| Ok(AlgebraElement::u1(c(t))), GroupSpec::u1(), 0.0, 1.0, &cfg()).unwrap();
        let integral = 3.0 * 5f64.sin() / 5.0 + 1.0 / 3.0;
        assert!(r.value.distance(&GroupElement::u1_phase(-integral)) < 1e-9);
    }

    #[test]
    fn backward_integration_inverts() {
        let fwd = path_ordered_exp(su2_poly, GroupSpec::su2(), 0.0, 1.0, &cfg()).unwrap().value;
        let bwd = path_ordered_exp(su2_poly, GroupSpec::su2(), 1.0, 0.0, &cfg()).unwrap().value;
        assert!((&fwd * &bwd).distance_to_identity() < 1e-9);
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let tight = SolverConfig::new(16, 1e-30, 1).unwrap();
        let err = path_ordered_exp(su2_poly, GroupSpec::su2(), 0.0, 1.0, &tight).unwrap_err();
        assert!(matches!(err, Error::ToleranceNotReached { .. }));
    }

    #[test]
    fn cocycle_identity_examples() {
        let tight = cfg().with_tol(1e-10).unwrap();
        let zero = |_| Ok(AlgebraElement::zero(GroupSpec::su2()));
        assert_eq!(check_cocycle_identity(zero, GroupSpec::su2(), 0.0, 0.5, 1.0, &tight).unwrap(), 0.0);
        assert!(check_cocycle_identity(su2_poly, GroupSpec::su2(), 0.0, 0.5, 1.0, &tight).unwrap() < 1e-8);
        assert!(check_cocycle_identity(su2_poly, GroupSpec::su2(), 0.3, 0.3, 1.0, &tight).unwrap() < 1e-12);
    }

    #[test]
    fn rk4_has_fourth_order() {
        let spec = GroupSpec::su2();
        let u = |n| rk4_fixed(su2_poly, spec, 0.0, 1.0, n).unwrap();
        let errs: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| u(n).distance(&u(2 * n))).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn single_precision_transport() {
        let x = lie::AlgebraElement::<f32>::su2(0.3, 0.2, -0.1);
        let c = SolverConfig::new(32, 1e-5, 4).unwrap();
        let r = path_ordered_exp(|_| Ok(x.clone()), GroupSpec::su2(), 0.0f32, 1.0f32, &c).unwrap();
        assert!(r.value.distance(&lie::exp_map(&x.scale(-1.0))) < 1e-5);
    }

    #[test]
    fn transport_along_constant_path_is_identity() {
        let a = presets::polynomial_form(plane(), GroupSpec::su2(), &presets::su2_bench_coeffs()).unwrap();
        let r = transport_local(&a, &Path::constant(Vector3::new(0.2, 0.1, 0.0)), &cfg()).unwrap();
        assert_eq!(r.value.distance_to_identity(), 0.0);
    }

    #[test]
    fn monopole_equator_transport_is_minus_one() {
        let cover = Cover::two_caps(0.3);
        let a = presets::monopole_form(cover.sets()[0].clone(), 1.0);
        let r = transport_local(&a, &Path::equator(), &cfg()).unwrap();
        assert!(r.value.distance(&GroupElement::u1_phase(PI)) < 1e-6);
    }

    #[test]
    fn constant_form_along_unit_segment() {
        let x = AlgebraElement::su2(0.5, 0.9, -0.3);
        let a = presets::constant_form(plane(), x.clone(), Vector3::x());
        let g = Path::segment(Vector3::zeros(), Vector3::x());
        let r = transport_local(&a, &g, &cfg()).unwrap();
        assert!(r.value.distance(&exp_map(&x.scale(-1.0))) < 1e-8);
    }

    #[test]
    fn gauge_covariance_examples() {
        let a = presets::polynomial_form(plane(), GroupSpec::su2(), &presets::su2_bench_coeffs()).unwrap();
        let path = Path::segment(Vector3::new(-0.5, 0.2, 0.0), Vector3::new(0.7, -0.4, 0.0));
        let id = GaugeFunction::identity(plane(), GroupSpec::su2());
        assert!(check_gauge_covariance(&a, &id, &path, &cfg()).unwrap() < 1e-12);
        let g = presets::exp_poly_gauge(plane(), GroupSpec::su2(), &presets::pure_gauge_coeffs()).unwrap();
        assert!(check_gauge_covariance(&a, &g, &path, &cfg()).unwrap() < 1e-6);

        let cover = Cover::two_caps(0.3);
        let an = presets::monopole_form(cover.sets()[0].clone(), 2.0);
        let phase = presets::monopole_phase(Domain::Set(cover.sets()[0].clone()), 2.0);
        let overlap = Path::latitude(1.5, 0.3);
        assert!(check_gauge_covariance(&an, &phase, &overlap, &cfg()).unwrap() < 1e-7);
    }

    #[test]
    fn recover_form_examples() {
        let id = FnOracle::new(GroupSpec::su2(), |_: &Path| Ok(GroupElement::identity(GroupSpec::su2())));
        let r = recover_form(&id, Manifold::plane(), &Vector3::zeros(), &Vector3::x()).unwrap();
        assert_eq!(r.norm(), 0.0);

        let x = AlgebraElement::su2(0.5, 0.9, -0.3);
        let oracle = LocalTransport {
            form: presets::constant_form(plane(), x.clone(), Vector3::x()),
            cfg: cfg(),
        };
        let r = recover_form(&oracle, Manifold::plane(), &Vector3::zeros(), &Vector3::x()).unwrap();
        assert!((&r - &x).norm() < 1e-5);

        let cover = Cover::two_caps(0.3);
        let k = 2.0;
        let oracle = LocalTransport {
            form: presets::monopole_form(cover.sets()[0].clone(), k),
            cfg: cfg(),
        };
        let theta = 1.0;
        let p = sphere_point(theta, 0.4);
        let (_, dphi) = sphere_coordinate_fields(&p);
        let r = recover_form(&oracle, Manifold::sphere(), &p, &dphi).unwrap();
        let expected = AlgebraElement::u1(0.5 * k * (1.0 - theta.cos()));
        assert!((&r - &expected).norm() < 1e-5);
    }
}
