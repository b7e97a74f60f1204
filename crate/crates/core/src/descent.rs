//! Differential cocycles over a cover, their morphisms, global transport
//! reconstruction from local data, and extraction of local data from a
//! transport oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::connection::{gauge_transform, Domain, GaugeFunction, LocalConnectionForm};
use crate::error::{Error, Result};
use crate::geometry::partition::CLEARANCE_MARGIN;
use crate::geometry::path::ENDPOINT_TOL;
use crate::geometry::{decompose_path, Cover, CoverSet, Path, PathPartition, Point, Tangent};
use crate::lie::{adjoint, op_norm, CMatrix, GroupSpec};
use crate::solver::{richardson_derivative, transport_local_range, SolverConfig, TransportOracle, TransportResult};
use crate::{AlgebraElement, GroupElement};

/// Tolerance of the triple condition `g_ik = g_jk g_ij`.
pub const TRIPLE_TOL: f64 = 1e-8;

/// Tolerance of `A_j = Ad_{g_ij} A_i - g_ij^* theta-bar`.
pub const COMPAT_TOL: f64 = 1e-6;

/// Rejection draws per overlap before it is reported empty.
pub const MAX_DRAWS: usize = 100_000;

/// Side of the chart grid tabulated by [`tabulate_stencil`].
pub const STENCIL_SIZE: usize = 21;

/// Connection forms on the sets of a cover glued by transition functions.
#[derive(Debug, Clone)]
pub struct DifferentialCocycle {
    cover: Cover,
    spec: GroupSpec,
    forms: Vec<LocalConnectionForm>,
    transitions: BTreeMap<(usize, usize), GaugeFunction>,
}

impl DifferentialCocycle {
    /// `forms[i]` lives on set `i`; `transitions[(i, j)]` maps the `i`
    /// trivialization to the `j` trivialization. Missing pairs are inferred as
    /// inverses of stored ones.
    pub fn new(
        cover: Cover,
        spec: GroupSpec,
        forms: Vec<LocalConnectionForm>,
        transitions: BTreeMap<(usize, usize), GaugeFunction>,
    ) -> Result<Self> {
        if forms.len() != cover.len() {
            return Err(Error::DimensionMismatch {
                expected: cover.len(),
                got: forms.len(),
            });
        }
        for (i, a) in forms.iter().enumerate() {
            if a.set_id() != Some(i) || a.spec() != spec {
                return Err(Error::Scene(format!("form {i} does not live on set {i} with group {spec}")));
            }
        }
        for (&(i, j), g) in &transitions {
            if i == j || i >= cover.len() || j >= cover.len() || g.spec() != spec {
                return Err(Error::Scene(format!("invalid transition g_{i}{j}")));
            }
        }
        Ok(Self {
            cover,
            spec,
            forms,
            transitions,
        })
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn forms(&self) -> &[LocalConnectionForm] {
        &self.forms
    }

    pub fn form(&self, i: usize) -> Result<&LocalConnectionForm> {
        self.forms.get(i).ok_or(Error::MissingTransition { i, j: i })
    }

    pub fn stored_transitions(&self) -> &BTreeMap<(usize, usize), GaugeFunction> {
        &self.transitions
    }

    /// `g_ij` as a function: identity for `i = j`, the inverse of `g_ji` when
    /// only that one is stored.
    pub fn transition(&self, i: usize, j: usize) -> Result<GaugeFunction> {
        let domain = Domain::Manifold(self.cover.manifold());
        if i == j {
            return Ok(GaugeFunction::identity(domain, self.spec));
        }
        if let Some(g) = self.transitions.get(&(i, j)) {
            return Ok(g.clone());
        }
        if let Some(g) = self.transitions.get(&(j, i)) {
            return Ok(g.inverse());
        }
        Err(Error::MissingTransition { i, j })
    }

    pub fn transition_at(&self, i: usize, j: usize, x: &Point) -> Result<GroupElement> {
        if i == j {
            return Ok(GroupElement::identity(self.spec));
        }
        if let Some(g) = self.transitions.get(&(i, j)) {
            return g.eval(x);
        }
        if let Some(g) = self.transitions.get(&(j, i)) {
            return Ok(g.eval(x)?.inverse());
        }
        Err(Error::MissingTransition { i, j })
    }

    /// The cocycle `(h_j g_ij h_i^-1, Ad_{h_i} A_i - h_i^* theta-bar)`, target
    /// of the morphism `h`.
    pub fn gauge_transform(&self, h: &CocycleMorphism) -> Result<Self> {
        if h.h.len() != self.cover.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cover.len(),
                got: h.h.len(),
            });
        }
        let forms = self
            .forms
            .iter()
            .zip(&h.h)
            .map(|(a, hi)| gauge_transform(a, hi))
            .collect();
        let transitions = self
            .transitions
            .iter()
            .map(|(&(i, j), g)| ((i, j), h.h[j].product(g).product(&h.h[i].inverse())))
            .collect();
        Self::new(self.cover.clone(), self.spec, forms, transitions)
    }
}

/// Deterministic rejection sample of points lying in every set of `sets`
/// with clearance above the partition margin. Returns `None` when no point
/// is found within [`MAX_DRAWS`] draws.
pub fn sample_overlap(cover: &Cover, sets: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Result<Option<Vec<Point>>> {
    let members: Vec<&CoverSet> = sets.iter().map(|&i| cover.set(i)).collect::<Result<_>>()?;
    let (lo, hi) = members[0].chart_bounds();
    let mut out = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n && draws < MAX_DRAWS {
        draws += 1;
        let q = Vector2::new(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]));
        let p = members[0].chart_inverse(&q);
        if members.iter().all(|s| s.clearance(&p) > CLEARANCE_MARGIN) {
            out.push(p);
        }
    }
    Ok(if out.is_empty() { None } else { Some(out) })
}

fn max_of(values: Vec<f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Machine-readable result of [`verify_cocycle`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleReport {
    pub max_triple: f64,
    pub max_compat: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub empty_overlaps: Vec<Vec<usize>>,
}

/// Checks the triple condition (including `g_ji = g_ij^-1` where both are
/// stored) and the compatibility of forms on sampled overlaps.
pub fn verify_cocycle(c: &DifferentialCocycle, n_samples: usize, seed: u64) -> Result<CocycleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c.cover.len();
    let mut empty = Vec::new();
    let mut max_triple = 0.0f64;
    let mut max_compat = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let Some(points) = sample_overlap(&c.cover, &[i, j], n_samples, &mut rng)? else {
                empty.push(vec![i, j]);
                continue;
            };
            let gij = c.transition(i, j)?;
            let devs: Vec<(f64, f64)> = points
                .par_iter()
                .map(|p| -> Result<(f64, f64)> {
                    let mut triple = 0.0f64;
                    if let (Some(a), Some(b)) = (c.transitions.get(&(i, j)), c.transitions.get(&(j, i))) {
                        triple = (&b.eval(p)? * &a.eval(p)?).distance_to_identity();
                    }
                    // A_j - Ad_g A_i + mc in the i -> j direction; the j -> i
                    // residual is Ad_{g^-1} of it.
                    let mut compat = 0.0f64;
                    for e in c.cover.manifold().tangent_basis(p) {
                        let (g, mc) = gij.eval_with_maurer_cartan(p, &e)?;
                        let ai = c.forms[i].eval(p, &e)?;
                        let aj = c.forms[j].eval(p, &e)?;
                        let residual = &(&aj - &adjoint(&g, &ai)) + &mc;
                        let reverse = adjoint(&g.inverse(), &residual);
                        compat = compat.max(residual.norm()).max(reverse.norm());
                    }
                    Ok((triple, compat))
                })
                .collect::<Result<_>>()?;
            max_triple = max_triple.max(max_of(devs.iter().map(|d| d.0).collect()));
            max_compat = max_compat.max(max_of(devs.iter().map(|d| d.1).collect()));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some(points) = sample_overlap(&c.cover, &[i, j, k], n_samples, &mut rng)? else {
                    empty.push(vec![i, j, k]);
                    continue;
                };
                let orders = [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)];
                let devs: Vec<f64> = points
                    .par_iter()
                    .map(|p| -> Result<f64> {
                        let mut worst = 0.0f64;
                        for (a, b, d) in orders {
                            let lhs = c.transition_at(a, d, p)?;
                            let rhs = &c.transition_at(b, d, p)? * &c.transition_at(a, b, p)?;
                            worst = worst.max(op_norm(&(lhs.mat() - rhs.mat())));
                        }
                        Ok(worst)
                    })
                    .collect::<Result<_>>()?;
                max_triple = max_triple.max(max_of(devs));
            }
        }
    }
    Ok(CocycleReport {
        max_triple,
        max_compat,
        n_samples,
        seed,
        pass: max_triple <= TRIPLE_TOL && max_compat <= COMPAT_TOL,
        empty_overlaps: empty,
    })
}

/// A morphism `h: (g, A) -> (g', A')`: one gauge function per set.
#[derive(Debug, Clone)]
pub struct CocycleMorphism {
    pub h: Vec<GaugeFunction>,
}

impl CocycleMorphism {
    pub fn identity(c: &DifferentialCocycle) -> Self {
        let h = c
            .cover
            .sets()
            .iter()
            .map(|s| GaugeFunction::identity(Domain::Set(s.clone()), c.spec))
            .collect();
        Self { h }
    }

    /// Restricts one global gauge function to every set.
    pub fn from_global(c: &DifferentialCocycle, g: &GaugeFunction) -> Self {
        let h = c
            .cover
            .sets()
            .iter()
            .map(|s| g.with_domain(Domain::Set(s.clone())))
            .collect();
        Self { h }
    }
}

/// Tolerances of the two morphism equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorphismTolerance {
    pub form: f64,
    pub transition: f64,
}

impl Default for MorphismTolerance {
    fn default() -> Self {
        Self {
            form: 1e-6,
            transition: 1e-8,
        }
    }
}

impl MorphismTolerance {
    /// Looser bounds for data recovered from a transport oracle.
    pub fn round_trip() -> Self {
        Self {
            form: 1e-4,
            transition: 1e-4,
        }
    }
}

/// Machine-readable result of [`verify_morphism`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorphismReport {
    pub max_form: f64,
    pub max_transition: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Checks `A'_i = Ad_{h_i} A_i - h_i^* theta-bar` on every set and
/// `h_j g_ij = g'_ij h_i` on every overlap.
pub fn verify_morphism(
    h: &CocycleMorphism,
    c: &DifferentialCocycle,
    c2: &DifferentialCocycle,
    n_samples: usize,
    seed: u64,
    tol: MorphismTolerance,
) -> Result<MorphismReport> {
    if c.cover != c2.cover || c.spec != c2.spec || h.h.len() != c.cover.len() {
        return Err(Error::CoverMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c.cover.len();
    let mut max_form = 0.0f64;
    for i in 0..n {
        let Some(points) = sample_overlap(&c.cover, &[i], n_samples, &mut rng)? else {
            continue;
        };
        let moved = gauge_transform(&c.forms[i], &h.h[i]);
        let devs: Vec<f64> = points
            .par_iter()
            .map(|p| c2.forms[i].distance_at(&moved, p))
            .collect::<Result<_>>()?;
        max_form = max_form.max(max_of(devs));
    }
    let mut max_transition = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let Some(points) = sample_overlap(&c.cover, &[i, j], n_samples, &mut rng)? else {
                continue;
            };
            let devs: Vec<f64> = points
                .par_iter()
                .map(|p| -> Result<f64> {
                    let lhs = &h.h[j].eval(p)? * &c.transition_at(i, j, p)?;
                    let rhs = &c2.transition_at(i, j, p)? * &h.h[i].eval(p)?;
                    Ok(op_norm(&(lhs.mat() - rhs.mat())))
                })
                .collect::<Result<_>>()?;
            max_transition = max_transition.max(max_of(devs));
        }
    }
    Ok(MorphismReport {
        max_form,
        max_transition,
        n_samples,
        seed,
        pass: max_form <= tol.form && max_transition <= tol.transition,
    })
}

/// The set whose trivialization reports transport at a point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnchorChoice {
    preferred: Option<usize>,
    overrides: Vec<(Point, usize)>,
}

impl AnchorChoice {
    /// The set of largest clearance (lowest id on ties).
    pub fn max_clearance() -> Self {
        Self::default()
    }

    /// `set` wherever it contains the point with margin, else the default.
    pub fn prefer(set: usize) -> Self {
        Self {
            preferred: Some(set),
            overrides: Vec::new(),
        }
    }

    /// Pins the anchor at one point.
    pub fn with_override(mut self, p: Point, set: usize) -> Self {
        self.overrides.push((p, set));
        self
    }

    pub fn set_for(&self, cover: &Cover, p: &Point) -> Result<usize> {
        for (q, set) in &self.overrides {
            if (q - p).norm() <= ENDPOINT_TOL {
                if cover.set(*set)?.clearance(p) > 0.0 {
                    return Ok(*set);
                }
                return Err(Error::JumpOutsideOverlap { from: *set, to: *set });
            }
        }
        if let Some(set) = self.preferred {
            if cover.set(set)?.clearance(p) > CLEARANCE_MARGIN {
                return Ok(set);
            }
        }
        let (set, c) = cover.best_set(p);
        if c <= 0.0 {
            return Err(Error::NoCoveringSet { t: f64::NAN });
        }
        Ok(set)
    }
}

/// One letter of a factored path.
#[derive(Debug, Clone)]
pub enum Step {
    /// Change of trivialization from set `from` to set `to` at `point`.
    Jump { from: usize, to: usize, point: Point },
    /// `path` on `[t0, t1]`, transported with the form of `set`.
    Piece { set: usize, path: Path, t0: f64, t1: f64 },
}

/// Alternating word `jump, piece, jump, ..., piece, jump`.
#[derive(Debug, Clone)]
pub struct FactoredPath {
    steps: Vec<Step>,
}

impl FactoredPath {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let fp = Self { steps };
        fp.check_shape()?;
        Ok(fp)
    }

    /// Pieces of `partition` joined by jumps at the breakpoints, with boundary
    /// jumps from `start_anchor` and to `end_anchor`.
    pub fn from_partition(path: &Path, partition: &PathPartition, start_anchor: usize, end_anchor: usize) -> Self {
        let mut steps = Vec::with_capacity(2 * partition.len() + 1);
        let mut current = start_anchor;
        for (t0, t1, set) in partition.pieces() {
            steps.push(Step::Jump {
                from: current,
                to: set,
                point: path.at(t0),
            });
            steps.push(Step::Piece {
                set,
                path: path.clone(),
                t0,
                t1,
            });
            current = set;
        }
        steps.push(Step::Jump {
            from: current,
            to: end_anchor,
            point: path.end(),
        });
        Self { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn piece_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Piece { .. })).count()
    }

    /// Inserts the jumps `set -> other -> set` at the parameter `t` inside
    /// piece number `piece`.
    pub fn with_detour(&self, piece: usize, t: f64, other: usize) -> Result<Self> {
        let idx = self
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Step::Piece { .. }))
            .nth(piece)
            .map(|(k, _)| k)
            .ok_or_else(|| Error::InvalidReparam(format!("no piece {piece}")))?;
        let Step::Piece { set, path, t0, t1 } = self.steps[idx].clone() else {
            unreachable!()
        };
        if !(t > t0 && t < t1) {
            return Err(Error::InvalidReparam(format!("detour point {t} outside piece")));
        }
        let x = path.at(t);
        let replacement = [
            Step::Piece {
                set,
                path: path.clone(),
                t0,
                t1: t,
            },
            Step::Jump {
                from: set,
                to: other,
                point: x,
            },
            Step::Jump {
                from: other,
                to: set,
                point: x,
            },
            Step::Piece { set, path, t0: t, t1 },
        ];
        let mut steps = self.steps.clone();
        steps.splice(idx..=idx, replacement);
        Ok(Self { steps })
    }

    fn check_shape(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidReparam(format!("malformed factored path: {msg}")));
        if !matches!(self.steps.first(), Some(Step::Jump { .. })) || !matches!(self.steps.last(), Some(Step::Jump { .. })) {
            return bad("must start and end with a jump");
        }
        let mut set = match &self.steps[0] {
            Step::Jump { to, .. } => *to,
            Step::Piece { .. } => unreachable!(),
        };
        let mut point = match &self.steps[0] {
            Step::Jump { point, .. } => *point,
            Step::Piece { .. } => unreachable!(),
        };
        for step in &self.steps[1..] {
            match step {
                Step::Jump { from, to, point: x } => {
                    if *from != set {
                        return bad("jump does not leave the current set");
                    }
                    let gap = (x - point).norm();
                    if gap > ENDPOINT_TOL {
                        return Err(Error::EndpointMismatch { gap });
                    }
                    set = *to;
                }
                Step::Piece { set: s, path, t0, t1 } => {
                    if *s != set {
                        return bad("piece set differs from the preceding jump");
                    }
                    let gap = (path.at(*t0) - point).norm();
                    if gap > ENDPOINT_TOL {
                        return Err(Error::EndpointMismatch { gap });
                    }
                    point = path.at(*t1);
                }
            }
        }
        Ok(())
    }

    /// Shape, endpoint chaining, piece membership and jump clearances.
    pub fn validate(&self, cover: &Cover) -> Result<()> {
        self.check_shape()?;
        for step in &self.steps {
            match step {
                Step::Jump { from, to, point } => {
                    let margin = if from == to { 0.0 } else { CLEARANCE_MARGIN };
                    let inside = |i: usize| -> Result<bool> { Ok(cover.set(i)?.clearance(point) > margin) };
                    if !inside(*from)? || !inside(*to)? {
                        return Err(Error::JumpOutsideOverlap { from: *from, to: *to });
                    }
                }
                Step::Piece { set, path, t0, t1 } => {
                    let s = cover.set(*set)?;
                    for t in path.sample_params(*t0, *t1) {
                        if s.clearance(&path.at(t)) <= 0.0 {
                            return Err(Error::NoCoveringSet { t });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Decomposes `path` over the cover and attaches anchor jumps at the ends.
pub fn factor_path(path: &Path, c: &DifferentialCocycle, anchors: &AnchorChoice) -> Result<FactoredPath> {
    let partition = decompose_path(path, &c.cover)?;
    let start = anchors.set_for(&c.cover, &path.start())?;
    let end = anchors.set_for(&c.cover, &path.end())?;
    Ok(FactoredPath::from_partition(path, &partition, start, end))
}

/// `g(alpha_n) k_n ... g(alpha_1) k_1 g(alpha_0)`.
pub fn reconstruct_transport(fp: &FactoredPath, c: &DifferentialCocycle, cfg: &SolverConfig) -> Result<TransportResult> {
    fp.validate(&c.cover)?;
    let locals: Vec<Option<TransportResult>> = fp
        .steps
        .par_iter()
        .map(|step| match step {
            Step::Piece { set, path, t0, t1 } => transport_local_range(&c.forms[*set], path, *t0, *t1, cfg).map(Some),
            Step::Jump { .. } => Ok(None),
        })
        .collect::<Result<_>>()?;
    let mut u = GroupElement::identity(c.spec);
    let mut err = 0.0;
    let mut steps = 0;
    for (step, local) in fp.steps.iter().zip(locals) {
        match (step, local) {
            (Step::Jump { from, to, point }, _) => {
                if from != to {
                    u = &c.transition_at(*from, *to, point)? * &u;
                }
            }
            (Step::Piece { .. }, Some(r)) => {
                u = &r.value * &u;
                err += r.estimated_error;
                steps += r.steps_used;
            }
            (Step::Piece { .. }, None) => unreachable!(),
        }
    }
    Ok(TransportResult {
        value: u,
        estimated_error: err,
        steps_used: steps,
    })
}

/// Global transport of a cocycle in a fixed anchor trivialization.
#[derive(Debug, Clone)]
pub struct GlobalTransport {
    pub cocycle: DifferentialCocycle,
    pub anchors: AnchorChoice,
    pub cfg: SolverConfig,
}

impl TransportOracle for GlobalTransport {
    fn spec(&self) -> GroupSpec {
        self.cocycle.spec
    }

    fn transport(&self, path: &Path) -> Result<GroupElement> {
        let fp = factor_path(path, &self.cocycle, &self.anchors)?;
        Ok(reconstruct_transport(&fp, &self.cocycle, &self.cfg)?.value)
    }
}

/// `A_i(p, v)` of the trivialization `F(r(y)) F(gamma) F(r(x))^-1`.
fn trivialized_form(oracle: &dyn TransportOracle, set: &CoverSet, p: &Point, v: &Tangent) -> Result<AlgebraElement> {
    let manifold = set.manifold();
    let (p, v) = (*p, *v);
    let anchor = oracle.transport(&set.contraction(&p))?;
    let f = |t: f64| -> Result<CMatrix<f64>> {
        let y = manifold.project(&(p + v * t));
        let initial = Path::from_core(move |s| manifold.project(&(p + v * (s * t))));
        let back = oracle.transport(&set.contraction(&y))?;
        Ok((&back * &oracle.transport(&initial)?).into_mat())
    };
    let d = richardson_derivative(f)?;
    let m = -(d * anchor.inverse().into_mat());
    Ok(AlgebraElement::project(oracle.spec(), &m))
}

/// Local data of a transport oracle: per-set forms recovered from the
/// contraction trivialization and transitions `F(r_j(x)) F(r_i(x))^-1`.
///
/// Forms are evaluated on demand; see [`tabulate_stencil`] for a fixed grid.
pub fn extract_descent(oracle: Arc<dyn TransportOracle>, cover: &Cover) -> Result<DifferentialCocycle> {
    let spec = oracle.spec();
    let forms = cover
        .sets()
        .iter()
        .map(|set| {
            let (o, s) = (oracle.clone(), set.clone());
            LocalConnectionForm::new(Domain::Set(set.clone()), spec, move |p, v| trivialized_form(&*o, &s, p, v))
        })
        .collect();
    let mut transitions = BTreeMap::new();
    for si in cover.sets() {
        for sj in cover.sets() {
            if si.id() >= sj.id() {
                continue;
            }
            let (o, si2, sj2) = (oracle.clone(), si.clone(), sj.clone());
            let g = GaugeFunction::new(Domain::Manifold(cover.manifold()), spec, move |x| {
                let fj = o.transport(&sj2.contraction(x))?;
                let fi = o.transport(&si2.contraction(x))?;
                Ok(&fj * &fi.inverse())
            });
            transitions.insert((si.id(), sj.id()), g);
        }
    }
    DifferentialCocycle::new(cover.clone(), spec, forms, transitions)
}

/// The morphism from `source` to the data extracted from its global
/// transport: `h_i(x) = F(r_i(x)) g_{i, a(x)}(x)`.
pub fn extraction_morphism(oracle: Arc<dyn TransportOracle>, source: &DifferentialCocycle, anchors: &AnchorChoice) -> CocycleMorphism {
    let h = source
        .cover
        .sets()
        .iter()
        .map(|set| {
            let (o, s, c, a) = (oracle.clone(), set.clone(), source.clone(), anchors.clone());
            GaugeFunction::new(Domain::Set(set.clone()), source.spec, move |x| {
                let anchor = a.set_for(&c.cover, x)?;
                Ok(&o.transport(&s.contraction(x))? * &c.transition_at(s.id(), anchor, x)?)
            })
        })
        .collect();
    CocycleMorphism { h }
}

/// Result of extracting local data from the global transport of a cocycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripReport {
    pub cocycle: CocycleReport,
    pub morphism: MorphismReport,
    pub pass: bool,
}

/// Reconstructs the global transport of `c`, extracts local data from it and
/// checks the result against `c` up to the contraction gauge.
pub fn round_trip(
    c: &DifferentialCocycle,
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
    n_samples: usize,
    seed: u64,
) -> Result<RoundTripReport> {
    let oracle: Arc<dyn TransportOracle> = Arc::new(GlobalTransport {
        cocycle: c.clone(),
        anchors: anchors.clone(),
        cfg: *cfg,
    });
    let extracted = extract_descent(oracle.clone(), &c.cover)?;
    let mut cocycle = verify_cocycle(&extracted, n_samples, seed)?;
    cocycle.pass = cocycle.max_triple <= MorphismTolerance::round_trip().transition
        && cocycle.max_compat <= MorphismTolerance::round_trip().form;
    let h = extraction_morphism(oracle, c, anchors);
    let morphism = verify_morphism(&h, c, &extracted, n_samples, seed, MorphismTolerance::round_trip())?;
    let pass = cocycle.pass && morphism.pass;
    Ok(RoundTripReport { cocycle, morphism, pass })
}

/// One node of the extraction stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSample {
    pub chart: [f64; 2],
    pub point: Point,
    /// `A_i` on the two chart basis vectors.
    pub values: [AlgebraElement; 2],
}

/// Evaluates form `set` of `c` on a `size x size` grid over the chart
/// rectangle of that set, skipping nodes outside the set.
pub fn tabulate_stencil(c: &DifferentialCocycle, set: usize, size: usize) -> Result<Vec<StencilSample>> {
    let s = c.cover.set(set)?;
    let (lo, hi) = s.chart_bounds();
    let size = size.max(2);
    let mut nodes = Vec::new();
    for a in 0..size {
        for b in 0..size {
            let fa = a as f64 / (size - 1) as f64;
            let fb = b as f64 / (size - 1) as f64;
            let q = Vector2::new(lo[0] + (hi[0] - lo[0]) * fa, lo[1] + (hi[1] - lo[1]) * fb);
            let p = s.chart_inverse(&q);
            if s.clearance(&p) > CLEARANCE_MARGIN {
                nodes.push((q, p));
            }
        }
    }
    let form = &c.forms[set];
    nodes
        .par_iter()
        .map(|(q, p)| {
            let ex = s.chart_pushforward(q, &Vector2::x());
            let ey = s.chart_pushforward(q, &Vector2::y());
            Ok(StencilSample {
                chart: [q.x, q.y],
                point: *p,
                values: [form.eval(p, &ex)?, form.eval(p, &ey)?],
            })
        })
        .collect()
}

/// Wraps an oracle and multiplies every answer by a pseudo-random element
/// depending on the path endpoints, breaking functoriality.
pub struct NoisyOracle {
    pub inner: Arc<dyn TransportOracle>,
    pub amplitude: f64,
}

fn hash_unit(p: &Point, q: &Point) -> f64 {
    let d = 12.9898 * p.x + 78.233 * p.y + 37.719 * p.z + 4.581 * q.x + 91.37 * q.y + 23.14 * q.z;
    (d.sin() * 43_758.545_312_3).fract()
}

impl TransportOracle for NoisyOracle {
    fn spec(&self) -> GroupSpec {
        self.inner.spec()
    }

    fn transport(&self, path: &Path) -> Result<GroupElement> {
        let clean = self.inner.transport(path)?;
        let spec = self.spec();
        let eta = self.amplitude * hash_unit(&path.start(), &path.end());
        let dim = spec.algebra_basis::<f64>().len();
        let coords = vec![eta; dim];
        let noise = crate::lie::exp_map(&AlgebraElement::from_coords(spec, &coords));
        Ok(&noise * &clean)
    }
}

/// `|g(y) F(gamma) - F'(gamma) g(x)|` for transports in two gauges related
/// by `h` with anchored endpoints.
pub fn morphism_transport_deviation(
    h: &CocycleMorphism,
    c: &DifferentialCocycle,
    c2: &DifferentialCocycle,
    path: &Path,
    anchors: &AnchorChoice,
    cfg: &SolverConfig,
) -> Result<f64> {
    let a = anchors.set_for(&c.cover, &path.start())?;
    let b = anchors.set_for(&c.cover, &path.end())?;
    let f = reconstruct_transport(&factor_path(path, c, anchors)?, c, cfg)?.value;
    let f2 = reconstruct_transport(&factor_path(path, c2, anchors)?, c2, cfg)?.value;
    let lhs = &h.h[b].eval(&path.end())? * &f;
    let rhs = &f2 * &h.h[a].eval(&path.start())?;
    Ok(op_norm(&(lhs.mat() - rhs.mat())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sphere_point, Manifold};
    use crate::presets;
    use crate::solver::transport_local;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn single_set_zero_cocycle_passes_trivially() {
        let cover = Cover::plane_single();
        let form = LocalConnectionForm::zero(Domain::Set(cover.sets()[0].clone()), GroupSpec::su2());
        let c = DifferentialCocycle::new(cover, GroupSpec::su2(), vec![form], BTreeMap::new()).unwrap();
        let r = verify_cocycle(&c, 100, 42).unwrap();
        assert!(r.pass);
        assert_eq!((r.max_triple, r.max_compat), (0.0, 0.0));
    }

    #[test]
    fn monopoles_are_cocycles() {
        for k in [1.0, 2.0, 3.0] {
            let r = verify_cocycle(&presets::monopole(k), 200, 42).unwrap();
            assert!(r.pass && r.max_triple < 1e-9 && r.max_compat < 1e-9, "{r:?}");
        }
        let r = verify_cocycle(&presets::trivial(), 50, 1).unwrap();
        assert!(r.pass && r.max_compat == 0.0);
    }

    #[test]
    fn corrupted_monopole_fails_compatibility() {
        let r = verify_cocycle(&presets::monopole_corrupt(), 200, 42).unwrap();
        assert!(!r.pass);
        assert!(r.max_compat > 0.1);
        assert!(r.max_triple < 1e-12);
    }

    #[test]
    fn grid_benchmark_is_a_cocycle() {
        let r = verify_cocycle(&presets::su2_poly_bench(), 100, 7).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.empty_overlaps.is_empty());
    }

    #[test]
    fn reports_are_deterministic() {
        let c = presets::su2_poly_bench();
        assert_eq!(verify_cocycle(&c, 30, 9).unwrap(), verify_cocycle(&c, 30, 9).unwrap());
    }

    #[test]
    fn morphism_examples() {
        let c = presets::monopole(1.0);
        let id = CocycleMorphism::identity(&c);
        let r = verify_morphism(&id, &c, &c, 100, 3, MorphismTolerance::default()).unwrap();
        assert!(r.pass && r.max_form < 1e-12 && r.max_transition < 1e-12);

        let g = GaugeFunction::new(Domain::Manifold(Manifold::sphere()), GroupSpec::u1(), |p| {
            Ok(GroupElement::u1_phase(0.7 * p.x + p.y * p.z))
        });
        let h = CocycleMorphism::from_global(&c, &g);
        let moved = c.gauge_transform(&h).unwrap();
        assert!(verify_morphism(&h, &c, &moved, 100, 3, MorphismTolerance::default()).unwrap().pass);

        let r = verify_morphism(&id, &c, &presets::monopole(2.0), 100, 3, MorphismTolerance::default()).unwrap();
        assert!(!r.pass && r.max_form > 0.1);

        let other = presets::su2_poly_bench();
        assert_eq!(
            verify_morphism(&id, &c, &other, 10, 3, MorphismTolerance::default()).unwrap_err(),
            Error::CoverMismatch
        );
    }

    #[test]
    fn factoring_examples() {
        let c = presets::monopole(1.0);
        let eq = factor_path(&Path::equator(), &c, &AnchorChoice::prefer(0)).unwrap();
        assert_eq!(eq.piece_count(), 1);
        assert!(matches!(eq.steps()[0], Step::Jump { from: 0, to: 0, .. }));
        assert!(matches!(eq.steps()[2], Step::Jump { from: 0, to: 0, .. }));

        let mer = factor_path(&Path::meridian(0.3, 0.0, PI), &c, &AnchorChoice::max_clearance()).unwrap();
        assert_eq!(mer.piece_count(), 2);
        let sets: Vec<(usize, usize)> = mer
            .steps()
            .iter()
            .filter_map(|s| match s {
                Step::Jump { from, to, .. } => Some((*from, *to)),
                Step::Piece { .. } => None,
            })
            .collect();
        assert_eq!(sets, vec![(0, 0), (0, 1), (1, 1)]);
        mer.validate(c.cover()).unwrap();
    }

    #[test]
    fn equator_holonomy_is_minus_one_in_any_factorization() {
        let c = presets::monopole(1.0);
        let anchors = AnchorChoice::prefer(0);
        let g = Path::equator();
        let fp = factor_path(&g, &c, &anchors).unwrap();
        let minus_one = GroupElement::u1_phase(PI);
        let direct = reconstruct_transport(&fp, &c, &cfg()).unwrap().value;
        assert!(direct.distance(&minus_one) < 1e-6);
        let local = transport_local(&c.forms()[0], &g, &cfg()).unwrap().value;
        assert!(direct.distance(&local) < 1e-14);

        let split = PathPartition::single(0).refine(0, 0.5).unwrap().reassign(1, 1);
        let forced = FactoredPath::from_partition(&g, &split, 0, 0);
        let value = reconstruct_transport(&forced, &c, &cfg()).unwrap().value;
        assert!(value.distance(&minus_one) < 1e-6);
        assert!(value.distance(&direct) < 1e-8);
    }

    #[test]
    fn partition_independence_on_the_grid() {
        let c = presets::su2_poly_bench();
        let anchors = AnchorChoice::max_clearance();
        let g = Path::waypoints(
            Manifold::plane(),
            &[Vector3::new(-1.2, -0.9, 0.0), Vector3::new(0.1, -0.05, 0.0), Vector3::new(1.1, 1.3, 0.0)],
        )
        .unwrap();
        let partition = decompose_path(&g, c.cover()).unwrap();
        let (a, b) = (
            anchors.set_for(c.cover(), &g.start()).unwrap(),
            anchors.set_for(c.cover(), &g.end()).unwrap(),
        );
        let base = reconstruct_transport(&FactoredPath::from_partition(&g, &partition, a, b), &c, &cfg())
            .unwrap()
            .value;
        let (t0, t1, _) = partition.pieces().next().unwrap();
        let refined = partition.refine(0, 0.5 * (t0 + t1)).unwrap();
        let r = reconstruct_transport(&FactoredPath::from_partition(&g, &refined, a, b), &c, &cfg()).unwrap();
        assert!(r.value.distance(&base) < 1e-8);

        // The middle of the path lies in all four quadrants.
        let t_mid = 0.5;
        let mid = g.at(t_mid);
        assert!(c.cover().sets().iter().all(|s| s.clearance(&mid) > 0.05));
        let piece = partition.pieces().position(|(s, e, _)| s < t_mid && t_mid < e).unwrap();
        let fp = FactoredPath::from_partition(&g, &partition, a, b);
        for other in 0..4 {
            let detour = fp.with_detour(piece, t_mid, other).unwrap();
            let r = reconstruct_transport(&detour, &c, &cfg()).unwrap();
            assert!(r.value.distance(&base) < 1e-8);
        }
    }

    #[test]
    fn jumps_outside_overlaps_are_rejected() {
        let c = presets::monopole(1.0);
        let g = Path::latitude(0.3, 0.0);
        let fp = FactoredPath::from_partition(&g, &PathPartition::single(0), 1, 0);
        assert_eq!(
            reconstruct_transport(&fp, &c, &cfg()).unwrap_err(),
            Error::JumpOutsideOverlap { from: 1, to: 0 }
        );
    }

    #[test]
    fn anchor_change_multiplies_by_transitions() {
        let c = presets::monopole(2.0);
        let g = Path::waypoints(
            Manifold::sphere(),
            &[sphere_point(1.4, 0.2), sphere_point(1.2, 1.4), sphere_point(1.7, 2.3)],
        )
        .unwrap();
        let (x, y) = (g.start(), g.end());
        let w = |a: usize, b: usize| {
            let anchors = AnchorChoice::max_clearance().with_override(x, a).with_override(y, b);
            reconstruct_transport(&factor_path(&g, &c, &anchors).unwrap(), &c, &cfg()).unwrap().value
        };
        let w00 = w(0, 0);
        let w11 = w(1, 1);
        let expected = &(&c.transition_at(0, 1, &y).unwrap() * &w00) * &c.transition_at(1, 0, &x).unwrap();
        assert!(w11.distance(&expected) < 1e-8);
    }

    #[test]
    fn morphisms_intertwine_transport() {
        let c = presets::su2_poly_bench();
        let g = presets::pure_gauge_function();
        let h = CocycleMorphism::from_global(&c, &g);
        let moved = c.gauge_transform(&h).unwrap();
        let path = Path::segment(Vector3::new(-1.0, 0.8, 0.0), Vector3::new(0.9, -0.6, 0.0));
        let anchors = AnchorChoice::max_clearance();
        let dev = morphism_transport_deviation(&h, &c, &moved, &path, &anchors, &cfg()).unwrap();
        assert!(dev < 1e-7, "{dev}");
    }

    #[test]
    fn extraction_from_the_trivial_cocycle_is_flat() {
        let c = presets::trivial();
        let oracle: Arc<dyn TransportOracle> = Arc::new(GlobalTransport {
            cocycle: c.clone(),
            anchors: AnchorChoice::max_clearance(),
            cfg: cfg(),
        });
        let e = extract_descent(oracle, c.cover()).unwrap();
        let p = sphere_point(1.0, 0.5);
        for v in Manifold::sphere().tangent_basis(&p) {
            assert!(e.forms()[0].eval(&p, &v).unwrap().norm() < 1e-5);
        }
        assert!(e.transition_at(0, 1, &sphere_point(1.5, 2.0)).unwrap().distance_to_identity() < 1e-6);
    }

    #[test]
    fn monopole_round_trip() {
        let r = round_trip(&presets::monopole(1.0), &AnchorChoice::max_clearance(), &cfg(), 6, 42).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn noisy_oracle_breaks_extraction() {
        let c = presets::monopole(1.0);
        let clean: Arc<dyn TransportOracle> = Arc::new(GlobalTransport {
            cocycle: c.clone(),
            anchors: AnchorChoice::max_clearance(),
            cfg: cfg(),
        });
        let noisy: Arc<dyn TransportOracle> = Arc::new(NoisyOracle {
            inner: clean,
            amplitude: 0.05,
        });
        let e = extract_descent(noisy, c.cover()).unwrap();
        let r = verify_cocycle(&e, 4, 42).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn stencil_covers_the_set() {
        let c = presets::plane_constant();
        let rows = tabulate_stencil(&c, 0, 5).unwrap();
        assert_eq!(rows.len(), 25);
        let x = presets::plane_constant_generator();
        assert!(rows.iter().all(|r| (&r.values[0] - &x).norm() == 0.0 && r.values[1].norm() == 0.0));
    }
}
