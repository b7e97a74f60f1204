//! Matrix Lie groups and their Lie algebras.
//!
//! Every group element and algebra element is a small dense complex matrix
//! (1x1 for U(1)), tagged with the [`GroupSpec`] it belongs to. The module is
//! generic over the real scalar so the same code serves `f32` and `f64`;
//! membership tolerances scale with the scalar's machine epsilon.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, ComplexField, DMatrix, RealField};
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real scalar usable by the Lie-group layer.
pub trait Real: RealField + Copy + FromPrimitive {}

impl<T: RealField + Copy + FromPrimitive> Real for T {}

/// Dense complex matrix over the scalar `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Default finite-difference step for Maurer-Cartan evaluation.
pub const MAURER_CARTAN_STEP: f64 = 1e-4;

/// Maximum distance from the group accepted by [`repair_to_group`].
pub const REPAIR_RADIUS: f64 = 1e-2;

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub(crate) fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(lit(re), lit(im))
}

/// Membership tolerance for the scalar type: 1e-8 for `f64`, looser for `f32`.
pub fn membership_tol<T: Real>() -> T {
    let scaled = T::default_epsilon() * lit(1e4);
    scaled.max(lit(1e-8))
}

/// Largest singular value.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].modulus();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, s| acc.max(*s))
}

fn one_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, z| acc + z.modulus()))
        .fold(T::zero(), |acc, s| acc.max(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    U1,
    SU2,
    SO3,
    Un,
    GLn,
}

#[derive(Deserialize)]
struct RawGroupSpec {
    kind: GroupKind,
    n: Option<usize>,
}

/// A matrix Lie group: its kind and the dimension of its defining matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGroupSpec")]
pub struct GroupSpec {
    kind: GroupKind,
    n: usize,
}

impl TryFrom<RawGroupSpec> for GroupSpec {
    type Error = Error;

    fn try_from(raw: RawGroupSpec) -> Result<Self> {
        let n = match (raw.kind, raw.n) {
            (GroupKind::U1, None) => 1,
            (GroupKind::SU2, None) => 2,
            (GroupKind::SO3, None) => 3,
            (_, Some(n)) => n,
            (kind, None) => {
                return Err(Error::InvalidSpec(format!("{kind:?} requires an explicit n")))
            }
        };
        GroupSpec::new(raw.kind, n)
    }
}

impl GroupSpec {
    pub fn new(kind: GroupKind, n: usize) -> Result<Self> {
        let ok = match kind {
            GroupKind::U1 => n == 1,
            GroupKind::SU2 => n == 2,
            GroupKind::SO3 => n == 3,
            GroupKind::Un | GroupKind::GLn => n >= 1,
        };
        if ok {
            Ok(Self { kind, n })
        } else {
            Err(Error::InvalidSpec(format!("{kind:?} cannot have n = {n}")))
        }
    }

    pub const fn u1() -> Self {
        Self { kind: GroupKind::U1, n: 1 }
    }

    pub const fn su2() -> Self {
        Self { kind: GroupKind::SU2, n: 2 }
    }

    pub const fn so3() -> Self {
        Self { kind: GroupKind::SO3, n: 3 }
    }

    pub fn un(n: usize) -> Result<Self> {
        Self::new(GroupKind::Un, n)
    }

    pub fn gln(n: usize) -> Result<Self> {
        Self::new(GroupKind::GLn, n)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unitary (or orthogonal) groups: every kind except GL(n).
    pub fn is_unitary(&self) -> bool {
        !matches!(self.kind, GroupKind::GLn)
    }

    pub fn is_abelian(&self) -> bool {
        match self.kind {
            GroupKind::U1 => true,
            GroupKind::Un | GroupKind::GLn => self.n == 1,
            _ => false,
        }
    }

    /// A real basis of the Lie algebra.
    ///
    /// U(1): `i`. SU(2): `i sigma_x, i sigma_y, i sigma_z`. SO(3): the rotation
    /// generators `L_x, L_y, L_z` with `(L_a)_bc = -eps_abc`.
    pub fn algebra_basis<T: Real>(&self) -> Vec<CMatrix<T>> {
        let n = self.n;
        let z = Complex::new(T::zero(), T::zero());
        let one = cplx::<T>(1.0, 0.0);
        let i = cplx::<T>(0.0, 1.0);
        match self.kind {
            GroupKind::U1 => vec![CMatrix::from_element(1, 1, i)],
            GroupKind::SU2 => {
                let sx = CMatrix::from_row_slice(2, 2, &[z, i, i, z]);
                let sy = CMatrix::from_row_slice(2, 2, &[z, one, -one, z]);
                let sz = CMatrix::from_row_slice(2, 2, &[i, z, z, -i]);
                vec![sx, sy, sz]
            }
            GroupKind::SO3 => {
                let mut out = Vec::with_capacity(3);
                for a in 0..3 {
                    let mut m = CMatrix::from_element(3, 3, z);
                    let b = (a + 1) % 3;
                    let c = (a + 2) % 3;
                    m[(b, c)] = -one;
                    m[(c, b)] = one;
                    out.push(m);
                }
                out
            }
            GroupKind::Un => {
                let mut out = Vec::with_capacity(n * n);
                for k in 0..n {
                    let mut m = CMatrix::from_element(n, n, z);
                    m[(k, k)] = i;
                    out.push(m);
                }
                for k in 0..n {
                    for l in (k + 1)..n {
                        let mut re = CMatrix::from_element(n, n, z);
                        re[(k, l)] = one;
                        re[(l, k)] = -one;
                        out.push(re);
                        let mut im = CMatrix::from_element(n, n, z);
                        im[(k, l)] = i;
                        im[(l, k)] = i;
                        out.push(im);
                    }
                }
                out
            }
            GroupKind::GLn => {
                let mut out = Vec::with_capacity(2 * n * n);
                for k in 0..n {
                    for l in 0..n {
                        for unit in [one, i] {
                            let mut m = CMatrix::from_element(n, n, z);
                            m[(k, l)] = unit;
                            out.push(m);
                        }
                    }
                }
                out
            }
        }
    }

    fn identity_matrix<T: Real>(&self) -> CMatrix<T> {
        CMatrix::identity(self.n, self.n)
    }

    /// Deviation of `mat` from group membership (0 for exact members).
    pub fn group_deviation<T: Real>(&self, mat: &CMatrix<T>) -> T {
        if mat.nrows() != self.n || mat.ncols() != self.n {
            return T::max_value().unwrap_or_else(T::one);
        }
        let mut dev = T::zero();
        if self.is_unitary() {
            let gram = mat * mat.adjoint() - self.identity_matrix::<T>();
            dev = dev.max(op_norm(&gram));
        }
        if matches!(self.kind, GroupKind::SU2 | GroupKind::SO3) {
            let det = mat.determinant() - Complex::new(T::one(), T::zero());
            dev = dev.max(det.modulus());
        }
        if self.kind == GroupKind::SO3 {
            dev = dev.max(max_imag(mat));
        }
        if self.kind == GroupKind::GLn && mat.determinant().modulus() <= T::default_epsilon() {
            dev = T::one();
        }
        dev
    }

    /// Deviation of `mat` from the Lie algebra (0 for exact members).
    pub fn algebra_deviation<T: Real>(&self, mat: &CMatrix<T>) -> T {
        if mat.nrows() != self.n || mat.ncols() != self.n {
            return T::max_value().unwrap_or_else(T::one);
        }
        let mut dev = T::zero();
        if self.is_unitary() {
            dev = dev.max(op_norm(&(mat + mat.adjoint())));
        }
        if matches!(self.kind, GroupKind::SU2 | GroupKind::SO3) {
            dev = dev.max(mat.trace().modulus());
        }
        if self.kind == GroupKind::SO3 {
            dev = dev.max(max_imag(mat));
        }
        dev
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GroupKind::U1 => write!(f, "U(1)"),
            GroupKind::SU2 => write!(f, "SU(2)"),
            GroupKind::SO3 => write!(f, "SO(3)"),
            GroupKind::Un => write!(f, "U({})", self.n),
            GroupKind::GLn => write!(f, "GL({}, C)", self.n),
        }
    }
}

fn max_imag<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.im.abs()))
}

/// An element of a matrix Lie group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T: Real> {
    spec: GroupSpec,
    mat: CMatrix<T>,
}

impl<T: Real> GroupElement<T> {
    /// Wraps `mat` after checking membership at [`membership_tol`].
    pub fn new(spec: GroupSpec, mat: CMatrix<T>) -> Result<Self> {
        let dev = spec.group_deviation(&mat);
        if dev > membership_tol::<T>() {
            return Err(Error::InvariantViolated {
                what: "group membership",
                deviation: to_f64(dev),
            });
        }
        Ok(Self { spec, mat })
    }

    pub(crate) fn from_matrix_unchecked(spec: GroupSpec, mat: CMatrix<T>) -> Self {
        Self { spec, mat }
    }

    pub fn identity(spec: GroupSpec) -> Self {
        Self {
            spec,
            mat: spec.identity_matrix(),
        }
    }

    /// `e^{i phase}` as a U(1) element.
    pub fn u1_phase(phase: T) -> Self {
        let z = Complex::new(phase.cos(), phase.sin());
        Self {
            spec: GroupSpec::u1(),
            mat: CMatrix::from_element(1, 1, z),
        }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn mat(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix<T> {
        self.mat
    }

    pub fn inverse(&self) -> Self {
        let mat = if self.spec.is_unitary() {
            self.mat.adjoint()
        } else {
            self.mat
                .clone()
                .try_inverse()
                .expect("GL(n) element must be invertible")
        };
        Self { spec: self.spec, mat }
    }

    /// Operator-norm distance between two elements.
    pub fn distance(&self, other: &Self) -> T {
        op_norm(&(&self.mat - &other.mat))
    }

    pub fn distance_to_identity(&self) -> T {
        op_norm(&(&self.mat - self.spec.identity_matrix::<T>()))
    }

    pub fn deviation(&self) -> T {
        self.spec.group_deviation(&self.mat)
    }
}

impl<T: Real> Mul for &GroupElement<T> {
    type Output = GroupElement<T>;

    fn mul(self, rhs: &GroupElement<T>) -> GroupElement<T> {
        debug_assert_eq!(self.spec, rhs.spec);
        GroupElement {
            spec: self.spec,
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl<T: Real> Mul for GroupElement<T> {
    type Output = GroupElement<T>;

    fn mul(self, rhs: GroupElement<T>) -> GroupElement<T> {
        &self * &rhs
    }
}

/// An element of the Lie algebra of a matrix group.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T: Real> {
    spec: GroupSpec,
    mat: CMatrix<T>,
}

impl<T: Real> AlgebraElement<T> {
    /// Wraps `mat` after checking it lies in the algebra.
    pub fn new(spec: GroupSpec, mat: CMatrix<T>) -> Result<Self> {
        let dev = spec.algebra_deviation(&mat);
        if dev > membership_tol::<T>() {
            return Err(Error::InvariantViolated {
                what: "algebra membership",
                deviation: to_f64(dev),
            });
        }
        Ok(Self { spec, mat })
    }

    pub fn zero(spec: GroupSpec) -> Self {
        Self {
            spec,
            mat: CMatrix::zeros(spec.n, spec.n),
        }
    }

    /// Linear combination of [`GroupSpec::algebra_basis`] elements.
    /// Missing trailing coordinates count as zero.
    pub fn from_coords(spec: GroupSpec, coords: &[T]) -> Self {
        let at = |k: usize| coords.get(k).copied().unwrap_or_else(T::zero);
        let z = T::zero();
        match spec.kind {
            GroupKind::U1 => {
                let mat = CMatrix::from_element(1, 1, Complex::new(z, at(0)));
                return Self { spec, mat };
            }
            GroupKind::SU2 => {
                let (x, y, w) = (at(0), at(1), at(2));
                let mat = CMatrix::from_row_slice(
                    2,
                    2,
                    &[Complex::new(z, w), Complex::new(y, x), Complex::new(-y, x), Complex::new(z, -w)],
                );
                return Self { spec, mat };
            }
            _ => {}
        }
        let mut mat = CMatrix::zeros(spec.n, spec.n);
        for (b, c) in spec.algebra_basis::<T>().iter().zip(coords) {
            mat += b * Complex::new(*c, T::zero());
        }
        Self { spec, mat }
    }

    /// `i x` in u(1).
    pub fn u1(x: T) -> Self {
        Self::from_coords(GroupSpec::u1(), &[x])
    }

    /// `x i sigma_x + y i sigma_y + z i sigma_z` in su(2).
    pub fn su2(x: T, y: T, z: T) -> Self {
        Self::from_coords(GroupSpec::su2(), &[x, y, z])
    }

    /// Orthogonal projection of an arbitrary matrix onto the algebra.
    pub fn project(spec: GroupSpec, m: &CMatrix<T>) -> Self {
        let half = Complex::new(lit::<T>(0.5), T::zero());
        let mut mat = match spec.kind {
            GroupKind::GLn => m.clone(),
            GroupKind::SO3 => {
                let re = m.map(|z| Complex::new(z.re, T::zero()));
                (&re - re.transpose()) * half
            }
            _ => (m - m.adjoint()) * half,
        };
        if spec.kind == GroupKind::SU2 {
            let shift = mat.trace() / Complex::new(lit::<T>(spec.n as f64), T::zero());
            for k in 0..spec.n {
                mat[(k, k)] -= shift;
            }
        }
        Self { spec, mat }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn mat(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            spec: self.spec,
            mat: &self.mat * Complex::new(s, T::zero()),
        }
    }

    /// Commutator `[x, y] = xy - yx`.
    pub fn bracket(&self, other: &Self) -> Self {
        Self {
            spec: self.spec,
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        }
    }

    /// Operator norm.
    pub fn norm(&self) -> T {
        op_norm(&self.mat)
    }

    pub fn deviation(&self) -> T {
        self.spec.algebra_deviation(&self.mat)
    }
}

impl<T: Real> Add for &AlgebraElement<T> {
    type Output = AlgebraElement<T>;

    fn add(self, rhs: &AlgebraElement<T>) -> AlgebraElement<T> {
        AlgebraElement {
            spec: self.spec,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<T: Real> Add for AlgebraElement<T> {
    type Output = AlgebraElement<T>;

    fn add(self, rhs: AlgebraElement<T>) -> AlgebraElement<T> {
        &self + &rhs
    }
}

impl<T: Real> Sub for &AlgebraElement<T> {
    type Output = AlgebraElement<T>;

    fn sub(self, rhs: &AlgebraElement<T>) -> AlgebraElement<T> {
        AlgebraElement {
            spec: self.spec,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl<T: Real> Sub for AlgebraElement<T> {
    type Output = AlgebraElement<T>;

    fn sub(self, rhs: AlgebraElement<T>) -> AlgebraElement<T> {
        &self - &rhs
    }
}

impl<T: Real> Neg for AlgebraElement<T> {
    type Output = AlgebraElement<T>;

    fn neg(self) -> AlgebraElement<T> {
        AlgebraElement {
            spec: self.spec,
            mat: -self.mat,
        }
    }
}

pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    nalgebra::try_convert::<T, f64>(x).unwrap_or(f64::NAN)
}

// Higham's Pade(13) coefficients and the matching 1-norm threshold.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `exp` of a 2x2 matrix: with `a = mu I + b`, `tr b = 0`, `b^2 = s^2 I` and
/// `exp a = e^mu (cosh s I + sinh(s)/s b)`.
fn expm2<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let half = Complex::new(lit::<T>(0.5), T::zero());
    let mu = (a[(0, 0)] + a[(1, 1)]) * half;
    let d = (a[(0, 0)] - a[(1, 1)]) * half;
    let s2 = d * d + a[(0, 1)] * a[(1, 0)];
    let s = ComplexField::sqrt(s2);
    let (ch, shc) = if s.modulus() < lit(1e-3) {
        let c = |x: f64| Complex::new(lit::<T>(x), T::zero());
        (
            c(1.0) + s2 * (c(0.5) + s2 * (c(1.0 / 24.0) + s2 * (c(1.0 / 720.0) + s2 * c(1.0 / 40320.0)))),
            c(1.0) + s2 * (c(1.0 / 6.0) + s2 * (c(1.0 / 120.0) + s2 * (c(1.0 / 5040.0) + s2 * c(1.0 / 362880.0)))),
        )
    } else {
        (ComplexField::cosh(s), ComplexField::sinh(s) / s)
    };
    let e = ComplexField::exp(mu);
    let mut out = CMatrix::zeros(2, 2);
    out[(0, 0)] = e * (ch + shc * d);
    out[(1, 1)] = e * (ch - shc * d);
    out[(0, 1)] = e * shc * a[(0, 1)];
    out[(1, 0)] = e * shc * a[(1, 0)];
    out
}

/// Matrix exponential: closed forms up to 2x2, otherwise scaling and squaring
/// with a [13/13] Pade approximant.
pub fn expm<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, ComplexField::exp(a[(0, 0)]));
    }
    if n == 2 {
        return expm2(a);
    }
    expm_pade(a)
}

fn expm_pade<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    let norm = one_norm(a);
    let theta: T = lit(THETA13);
    let mut s = 0i32;
    if norm > theta {
        s = to_f64((norm / theta).log2().ceil()) as i32;
    }
    let scale = Complex::new(lit::<T>(2f64.powi(-s)), T::zero());
    let a = a * scale;
    let b = |k: usize| Complex::new(lit::<T>(PADE13[k]), T::zero());
    let ident = CMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let w1 = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let w2 = &a6 * &w1 + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1);
    let u = &a * w2;
    let z1 = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * z1 + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Exponential map from the algebra to the group.
pub fn exp_map<T: Real>(x: &AlgebraElement<T>) -> GroupElement<T> {
    let m = expm(&x.mat);
    if x.spec.n <= 2 && x.spec.is_unitary() {
        // The closed forms are on the group up to rounding.
        return GroupElement { spec: x.spec, mat: m };
    }
    repair_to_group(&m, x.spec).unwrap_or(GroupElement {
        spec: x.spec,
        mat: m,
    })
}

fn sqrtm_denman_beavers<T: Real>(x: &CMatrix<T>) -> Option<CMatrix<T>> {
    let n = x.nrows();
    let half = Complex::new(lit::<T>(0.5), T::zero());
    let mut y = x.clone();
    let mut z = CMatrix::<T>::identity(n, n);
    let tol = T::default_epsilon() * lit(16.0);
    for _ in 0..60 {
        let y_inv = y.clone().try_inverse()?;
        let z_inv = z.clone().try_inverse()?;
        let y_next = (&y + z_inv) * half;
        z = (&z + y_inv) * half;
        let step = (&y_next - &y).norm();
        y = y_next;
        if step <= tol * y.norm() {
            break;
        }
    }
    Some(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Requires `|g - I| < 1` in operator norm.
pub fn logm<T: Real>(g: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = g.nrows();
    let ident = CMatrix::<T>::identity(n, n);
    let radius = op_norm(&(g - &ident));
    if radius >= T::one() {
        return Err(Error::OutOfRadius {
            norm: to_f64(radius),
        });
    }
    if n == 1 {
        return Ok(CMatrix::from_element(1, 1, ComplexField::ln(g[(0, 0)])));
    }
    let mut x = g.clone();
    let mut squarings = 0i32;
    while (&x - &ident).norm() > lit(0.25) && squarings < 40 {
        x = sqrtm_denman_beavers(&x).ok_or(Error::OutOfRadius {
            norm: to_f64(radius),
        })?;
        squarings += 1;
    }
    // log X = 2 atanh(Z), Z = (X - I)(X + I)^-1
    let z = (&x + &ident)
        .lu()
        .solve(&(&x - &ident))
        .ok_or(Error::OutOfRadius {
            norm: to_f64(radius),
        })?;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    let tol = T::default_epsilon();
    for k in 1..200 {
        term = &term * &z2;
        let contrib = &term * Complex::new(lit::<T>(1.0 / (2 * k + 1) as f64), T::zero());
        let size = contrib.norm();
        sum += contrib;
        if size <= tol * sum.norm() {
            break;
        }
    }
    let factor = lit::<T>(2f64.powi(squarings + 1));
    Ok(sum * Complex::new(factor, T::zero()))
}

/// Logarithm map from the group to the algebra (principal branch).
pub fn log_map<T: Real>(g: &GroupElement<T>) -> Result<AlgebraElement<T>> {
    let l = logm(&g.mat)?;
    Ok(AlgebraElement::project(g.spec, &l))
}

/// Adjoint action `g x g^-1`.
pub fn adjoint<T: Real>(g: &GroupElement<T>, x: &AlgebraElement<T>) -> AlgebraElement<T> {
    let mat = &g.mat * &x.mat * g.inverse().mat;
    AlgebraElement { spec: x.spec, mat }
}

/// Right Maurer-Cartan form `(d/dt g)(t) g(t)^-1` by a five-point central
/// difference with the default step.
pub fn right_maurer_cartan<T, F>(curve: F, t: T) -> AlgebraElement<T>
where
    T: Real,
    F: Fn(T) -> GroupElement<T>,
{
    try_right_maurer_cartan(|s| Ok(curve(s)), t, lit(MAURER_CARTAN_STEP))
        .expect("infallible curve")
}

/// Fallible variant of [`right_maurer_cartan`] with an explicit step.
pub fn try_right_maurer_cartan<T, F>(curve: F, t: T, h: T) -> Result<AlgebraElement<T>>
where
    T: Real,
    F: Fn(T) -> Result<GroupElement<T>>,
{
    let g0 = curve(t)?;
    let p1 = curve(t + h)?;
    let m1 = curve(t - h)?;
    let p2 = curve(t + h + h)?;
    let m2 = curve(t - h - h)?;
    let eight = Complex::new(lit::<T>(8.0), T::zero());
    let denom = Complex::new(lit::<T>(12.0) * h, T::zero());
    let dg = ((&p1.mat - &m1.mat) * eight - (&p2.mat - &m2.mat)) / denom;
    Ok(right_maurer_cartan_exact(&g0, &dg))
}

/// Right Maurer-Cartan form from a known derivative `dg` at `g`.
pub fn right_maurer_cartan_exact<T: Real>(g: &GroupElement<T>, dg: &CMatrix<T>) -> AlgebraElement<T> {
    AlgebraElement::project(g.spec, &(dg * g.inverse().mat))
}

/// Nearest group element via the polar decomposition `m = U P`.
///
/// Unitary kinds return `U` (with the determinant phase removed for SU(2) and
/// a sign check for SO(3)); GL(n) returns `m` itself when invertible.
pub fn repair_to_group<T: Real>(m: &CMatrix<T>, spec: GroupSpec) -> Result<GroupElement<T>> {
    let n = spec.n;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    let radius: T = lit(REPAIR_RADIUS);
    if spec.kind == GroupKind::GLn {
        let det = m.determinant().modulus();
        if det <= T::default_epsilon() {
            return Err(Error::TooFarFromGroup { distance: to_f64(det) });
        }
        return Ok(GroupElement::from_matrix_unchecked(spec, m.clone()));
    }
    let u = if n == 1 {
        let z = m[(0, 0)];
        let r = z.modulus();
        if r <= T::default_epsilon() {
            return Err(Error::TooFarFromGroup { distance: 1.0 });
        }
        CMatrix::from_element(1, 1, z / Complex::new(r, T::zero()))
    } else {
        let start = if spec.kind == GroupKind::SO3 {
            m.map(|z| Complex::new(z.re, T::zero()))
        } else {
            m.clone()
        };
        let mut u = polar_unitary(&start).ok_or(Error::TooFarFromGroup {
            distance: f64::INFINITY,
        })?;
        match spec.kind {
            GroupKind::SU2 => {
                let det = u.determinant();
                let root = ComplexField::sqrt(det);
                u /= root;
            }
            GroupKind::SO3 => {
                u = u.map(|z| Complex::new(z.re, T::zero()));
                if u.determinant().re < T::zero() {
                    return Err(Error::TooFarFromGroup { distance: 2.0 });
                }
            }
            _ => {}
        }
        u
    };
    let distance = op_norm(&(m - &u));
    if distance > radius {
        return Err(Error::TooFarFromGroup {
            distance: to_f64(distance),
        });
    }
    Ok(GroupElement::from_matrix_unchecked(spec, u))
}

// Newton iteration X <- (X + X^-H) / 2 for the unitary polar factor.
fn polar_unitary<T: Real>(m: &CMatrix<T>) -> Option<CMatrix<T>> {
    let half = Complex::new(lit::<T>(0.5), T::zero());
    let tol = T::default_epsilon() * lit(8.0 * (m.nrows() as f64).sqrt());
    let mut x = m.clone();
    for _ in 0..100 {
        let inv_h = x.clone().try_inverse()?.adjoint();
        let next = (&x + inv_h) * half;
        let step = (&next - &x).norm();
        x = next;
        if step <= tol {
            return Some(x);
        }
    }
    Some(x)
}
