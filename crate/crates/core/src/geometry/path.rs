use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use super::manifold::{sphere_point, Manifold};
use super::{Point, Tangent};
use crate::error::{Error, Result};

/// Width of the sitting-instant collars imposed on user curves.
pub const SITTING_EPSILON: f64 = 0.1;

/// Default number of samples used by membership and partition checks.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Finite-difference step for path tangents.
pub const TANGENT_STEP: f64 = 1e-4;

/// Tolerance for matching path endpoints.
pub const ENDPOINT_TOL: f64 = 1e-10;

type Curve = Arc<dyn Fn(f64) -> Point + Send + Sync>;

/// Degree-7 smoothstep `35s^4 - 84s^5 + 70s^6 - 20s^7`, clamped to `[0, 1]`.
pub fn smoothstep7(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s.powi(4) * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
}

pub fn smoothstep7_derivative(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    140.0 * (s * (1.0 - s)).powi(3)
}

/// The reparameterization `[0,1] -> [0,1]` that is constant on the collars
/// `[0, eps]` and `[1 - eps, 1]` and a smoothstep in between.
pub fn sitting_wrap(t: f64, eps: f64) -> f64 {
    smoothstep7((t - eps) / (1.0 - 2.0 * eps))
}

/// Derivative of [`sitting_wrap`]: the speed of the core parameter.
pub fn sitting_wrap_speed(t: f64, eps: f64) -> f64 {
    smoothstep7_derivative((t - eps) / (1.0 - 2.0 * eps)) / (1.0 - 2.0 * eps)
}

/// A smooth path `[0,1] -> M` with sitting instants.
#[derive(Clone)]
pub struct Path {
    curve: Curve,
    sitting_epsilon: f64,
    samples: usize,
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Path")
            .field("start", &self.start())
            .field("end", &self.end())
            .field("sitting_epsilon", &self.sitting_epsilon)
            .finish()
    }
}

impl Path {
    /// Wraps a core curve `[0,1] -> M` with sitting instants of width
    /// [`SITTING_EPSILON`].
    pub fn from_core<F>(core: F) -> Self
    where
        F: Fn(f64) -> Point + Send + Sync + 'static,
    {
        let eps = SITTING_EPSILON;
        Self {
            curve: Arc::new(move |t| core(sitting_wrap(t, eps))),
            sitting_epsilon: eps,
            samples: DEFAULT_SAMPLES,
        }
    }

    /// A curve that already has sitting instants of width `eps`.
    pub fn with_sitting_instants<F>(curve: F, eps: f64) -> Result<Self>
    where
        F: Fn(f64) -> Point + Send + Sync + 'static,
    {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidReparam(format!("sitting epsilon {eps} not in (0, 1/2)")));
        }
        Ok(Self {
            curve: Arc::new(curve),
            sitting_epsilon: eps,
            samples: DEFAULT_SAMPLES,
        })
    }

    /// The identity path `id_x`.
    pub fn constant(x: Point) -> Self {
        Self {
            curve: Arc::new(move |_| x),
            sitting_epsilon: SITTING_EPSILON,
            samples: DEFAULT_SAMPLES,
        }
    }

    /// Straight ambient segment from `a` to `b` (a path on the plane).
    pub fn segment(a: Point, b: Point) -> Self {
        Self::from_core(move |s| a + (b - a) * s)
    }

    /// Latitude circle at polar angle `theta`, starting at azimuth `phi0` and
    /// running eastward once around.
    pub fn latitude(theta: f64, phi0: f64) -> Self {
        Self::from_core(move |s| sphere_point(theta, phi0 + std::f64::consts::TAU * s))
    }

    pub fn equator() -> Self {
        Self::latitude(std::f64::consts::FRAC_PI_2, 0.0)
    }

    /// Meridian at azimuth `phi` from polar angle `theta_start` to `theta_end`.
    pub fn meridian(phi: f64, theta_start: f64, theta_end: f64) -> Self {
        Self::from_core(move |s| sphere_point(theta_start + (theta_end - theta_start) * s, phi))
    }

    /// Shorter great-circle arc between two non-antipodal sphere points.
    pub fn great_arc(a: Point, b: Point) -> Self {
        let a = a.normalize();
        let b = b.normalize();
        let omega = a.dot(&b).clamp(-1.0, 1.0).acos();
        if omega < 1e-14 {
            return Self::constant(a);
        }
        Self::from_core(move |s| {
            let w0 = ((1.0 - s) * omega).sin() / omega.sin();
            let w1 = (s * omega).sin() / omega.sin();
            (a * w0 + b * w1).normalize()
        })
    }

    /// Natural cubic spline through `points` (uniform knots), projected onto
    /// `manifold`.
    pub fn waypoints(manifold: Manifold, points: &[Point]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidReparam("need at least two waypoints".into()));
        }
        let spline = CubicSpline::natural(points);
        Ok(Self::from_core(move |s| manifold.project(&spline.eval(s))))
    }

    /// Evaluates the curve, extended constantly outside `[0, 1]`.
    pub fn at(&self, t: f64) -> Point {
        (self.curve)(t.clamp(0.0, 1.0))
    }

    pub fn start(&self) -> Point {
        self.at(0.0)
    }

    pub fn end(&self) -> Point {
        self.at(1.0)
    }

    pub fn sitting_epsilon(&self) -> f64 {
        self.sitting_epsilon
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(2);
        self
    }

    pub fn is_loop(&self) -> bool {
        (self.start() - self.end()).norm() <= ENDPOINT_TOL
    }

    /// Sample parameters `k / (samples - 1)` restricted to `[t0, t1]`, with both
    /// endpoints included.
    pub fn sample_params(&self, t0: f64, t1: f64) -> Vec<f64> {
        let count = (((t1 - t0).abs() * self.samples as f64).ceil() as usize).max(16);
        (0..=count)
            .map(|k| t0 + (t1 - t0) * k as f64 / count as f64)
            .collect()
    }

    /// The restriction of the path to `[t0, t1]`, re-wrapped with sitting
    /// instants.
    pub fn restrict(&self, t0: f64, t1: f64) -> Path {
        let inner = self.clone();
        Path::from_core(move |s| inner.at(t0 + (t1 - t0) * s))
    }
}

/// Concatenation: `g1` on `[0, 1/2]`, then `g2` on `[1/2, 1]`.
pub fn compose_paths(g1: &Path, g2: &Path) -> Result<Path> {
    let gap = (g1.end() - g2.start()).norm();
    if gap > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch { gap });
    }
    let a = g1.clone();
    let b = g2.clone();
    Ok(Path {
        curve: Arc::new(move |t| if t <= 0.5 { a.at(2.0 * t) } else { b.at(2.0 * t - 1.0) }),
        sitting_epsilon: g1.sitting_epsilon.min(g2.sitting_epsilon) / 2.0,
        samples: g1.samples.max(g2.samples),
    })
}

pub fn invert_path(g: &Path) -> Path {
    let inner = g.clone();
    Path {
        curve: Arc::new(move |t| inner.at(1.0 - t)),
        sitting_epsilon: g.sitting_epsilon,
        samples: g.samples,
    }
}

/// Precomposition `g . beta` with an endpoint-fixing, weakly increasing
/// reparameterization.
pub fn reparameterize(
    g: &Path,
    beta: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
) -> Result<Path> {
    if beta(0.0).abs() > 1e-12 || (beta(1.0) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidReparam("beta must fix 0 and 1".into()));
    }
    let n = g.samples.max(64);
    let mut prev = beta(0.0);
    for k in 1..=n {
        let b = beta(k as f64 / n as f64);
        if b < prev - 1e-15 || !(-1e-12..=1.0 + 1e-12).contains(&b) {
            return Err(Error::InvalidReparam("beta must be weakly increasing in [0, 1]".into()));
        }
        prev = b;
    }
    // Largest collar mapped into the collars of g.
    let eps = g.sitting_epsilon;
    let lower = bisect_last(|t| beta(t) <= eps, 0.0, 0.5);
    let upper = bisect_last(|t| beta(1.0 - t) >= 1.0 - eps, 0.0, 0.5);
    let new_eps = lower.min(upper).min(0.49);
    if new_eps <= 0.0 {
        return Err(Error::InvalidReparam("no sitting instant survives".into()));
    }
    let inner = g.clone();
    Ok(Path {
        curve: Arc::new(move |t| inner.at(beta(t.clamp(0.0, 1.0)))),
        sitting_epsilon: new_eps,
        samples: g.samples,
    })
}

// Largest t in [lo, hi] with pred(t), assuming pred holds on an initial interval.
fn bisect_last(pred: impl Fn(f64) -> bool, lo: f64, hi: f64) -> f64 {
    if pred(hi) {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Velocity of the path at `t`: zero inside the sitting instants, a
/// five-point difference elsewhere (one-sided near the ends).
pub fn tangent(g: &Path, t: f64) -> Tangent {
    let eps = g.sitting_epsilon;
    if t <= eps || t >= 1.0 - eps {
        return Vector3::zeros();
    }
    let h = TANGENT_STEP;
    let f = |s: f64| g.at(s);
    if t - 2.0 * h < 0.0 {
        (f(t) * -25.0 + f(t + h) * 48.0 - f(t + 2.0 * h) * 36.0 + f(t + 3.0 * h) * 16.0
            - f(t + 4.0 * h) * 3.0)
            / (12.0 * h)
    } else if t + 2.0 * h > 1.0 {
        (f(t) * 25.0 - f(t - h) * 48.0 + f(t - 2.0 * h) * 36.0 - f(t - 3.0 * h) * 16.0
            + f(t - 4.0 * h) * 3.0)
            / (12.0 * h)
    } else {
        ((f(t + h) - f(t - h)) * 8.0 - (f(t + 2.0 * h) - f(t - 2.0 * h))) / (12.0 * h)
    }
}

/// The reparameterization family used for thin-homotopy checks: the
/// collar-wrapped identity, a global smoothstep, and a squared smoothstep.
pub fn reparameterization_family() -> Vec<(&'static str, Arc<dyn Fn(f64) -> f64 + Send + Sync>)> {
    vec![
        ("sitting_identity", Arc::new(|t| sitting_wrap(t, SITTING_EPSILON))),
        ("smoothstep7", Arc::new(smoothstep7)),
        ("smoothstep7_squared", Arc::new(|t| smoothstep7(t).powi(2))),
    ]
}

struct CubicSpline {
    points: Vec<Point>,
    second: Vec<Point>,
}

impl CubicSpline {
    // Natural spline with knots at k / (n - 1).
    fn natural(points: &[Point]) -> Self {
        let n = points.len();
        let mut second = vec![Vector3::zeros(); n];
        if n > 2 {
            // Thomas algorithm for M_{k-1} + 4 M_k + M_{k+1} = 6 (p_{k+1} - 2 p_k + p_{k-1}) / h^2
            let h = 1.0 / (n - 1) as f64;
            let m = n - 2;
            let mut c = vec![0.0; m];
            let mut d = vec![Vector3::zeros(); m];
            for k in 0..m {
                let rhs = (points[k + 2] - points[k + 1] * 2.0 + points[k]) * (6.0 / (h * h));
                if k == 0 {
                    c[k] = 1.0 / 4.0;
                    d[k] = rhs / 4.0;
                } else {
                    let denom = 4.0 - c[k - 1];
                    c[k] = 1.0 / denom;
                    d[k] = (rhs - d[k - 1]) / denom;
                }
            }
            for k in (0..m).rev() {
                let next = if k + 1 < m { second[k + 2] } else { Vector3::zeros() };
                second[k + 1] = d[k] - next * c[k];
            }
        }
        Self {
            points: points.to_vec(),
            second,
        }
    }

    fn eval(&self, s: f64) -> Point {
        let n = self.points.len();
        let h = 1.0 / (n - 1) as f64;
        let k = ((s / h).floor() as usize).min(n - 2);
        let a = (k as f64 + 1.0) * h - s;
        let b = s - k as f64 * h;
        let (p0, p1) = (self.points[k], self.points[k + 1]);
        let (m0, m1) = (self.second[k], self.second[k + 1]);
        m0 * (a.powi(3) / (6.0 * h))
            + m1 * (b.powi(3) / (6.0 * h))
            + (p0 / h - m0 * (h / 6.0)) * a
            + (p1 / h - m1 * (h / 6.0)) * b
    }
}
