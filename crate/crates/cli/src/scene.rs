//! JSON scene files: group, cover, per-set connection forms, transitions,
//! named paths, an optional global gauge and a probe for pointwise commands.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use nalgebra::{Complex, DMatrix, Vector3};
use partrans::connection::{gauge_transform, Domain, GaugeFunction, LocalConnectionForm};
use partrans::descent::DifferentialCocycle;
use partrans::geometry::{Cover, Manifold, Path, Point, Tangent};
use partrans::lie::{GroupKind, GroupSpec};
use partrans::presets::{self, FormCoeffs, GaugeCoeffs};
use partrans::solver::SolverConfig;
use partrans::{AlgebraElement, Error, Result};
use serde::{Deserialize, Serialize};

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub group: GroupSpec,
    pub cocycle: CocycleSpec,
    #[serde(default)]
    pub paths: BTreeMap<String, PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverKind {
    TwoCaps,
    PlaneGrid,
    PlaneSingle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSpec {
    pub cover: CoverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case")]
pub enum ConnectionSpec {
    Zero,
    Monopole { k: f64 },
    Constant { x: MatrixSpec, covector: [f64; 3] },
    PureGauge { coeffs: GaugeCoeffs },
    Polynomial { coeffs: FormCoeffs },
}

/// A form, optionally written in the local gauge `exp(P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSpec {
    #[serde(flatten)]
    pub connection: ConnectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeCoeffs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case")]
pub enum GaugeSpec {
    Identity,
    MonopolePhase { k: f64 },
    ExpPoly { coeffs: GaugeCoeffs },
    /// `exp(P_j) exp(P_i)^-1`.
    GaugeQuotient { hi: GaugeCoeffs, hj: GaugeCoeffs },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub gauge: GaugeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathPreset {
    Latitude,
    Meridian,
    Equator,
    Waypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub preset: PathPreset,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<[f64; 3]>,
}

/// Point, tangent pair and set for `curvature` and `small-loop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub point: [f64; 3],
    pub v: [f64; 3],
    pub w: [f64; 3],
    pub set: usize,
}

/// An instantiated scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub cocycle: DifferentialCocycle,
    pub paths: BTreeMap<String, Path>,
    pub gauge: Option<GaugeFunction>,
    pub probe: Option<(Point, Tangent, Tangent, usize)>,
}

fn scene_err(msg: impl Into<String>) -> Error {
    Error::Scene(msg.into())
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub fn matrix_from_spec(m: &MatrixSpec) -> Result<DMatrix<Complex<f64>>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(scene_err("matrix rows must be non-empty and of equal length"));
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| Complex::new(m[r][c][0], m[r][c][1])))
}

pub fn matrix_to_spec(m: &DMatrix<Complex<f64>>) -> MatrixSpec {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

impl CocycleSpec {
    fn cover(&self) -> Cover {
        match self.cover {
            CoverKind::TwoCaps => Cover::two_caps(self.overlap.unwrap_or(presets::MONOPOLE_OVERLAP)),
            CoverKind::PlaneGrid => Cover::plane_grid(self.overlap.unwrap_or(presets::PLANE_GRID_OVERLAP)),
            CoverKind::PlaneSingle => Cover::plane_single(),
        }
    }
}

impl ConnectionSpec {
    fn build(&self, domain: Domain, spec: GroupSpec) -> Result<LocalConnectionForm> {
        let need = |kind: GroupKind| {
            if spec.kind() == kind {
                Ok(())
            } else {
                Err(scene_err(format!("{self:?} needs group {kind:?}")))
            }
        };
        match self {
            ConnectionSpec::Zero => Ok(LocalConnectionForm::zero(domain, spec)),
            ConnectionSpec::Monopole { k } => {
                need(GroupKind::U1)?;
                match domain {
                    Domain::Set(set) => Ok(presets::monopole_form(set, *k)),
                    Domain::Manifold(_) => Err(scene_err("monopole forms live on cover sets")),
                }
            }
            ConnectionSpec::Constant { x, covector } => {
                let x = AlgebraElement::new(spec, matrix_from_spec(x)?)?;
                Ok(presets::constant_form(domain, x, vec3(*covector)))
            }
            ConnectionSpec::PureGauge { coeffs } => {
                Ok(presets::pure_gauge_form(&presets::exp_poly_gauge(domain, spec, coeffs)?))
            }
            ConnectionSpec::Polynomial { coeffs } => presets::polynomial_form(domain, spec, coeffs),
        }
    }
}

impl GaugeSpec {
    pub fn build(&self, domain: Domain, spec: GroupSpec) -> Result<GaugeFunction> {
        match self {
            GaugeSpec::Identity => Ok(GaugeFunction::identity(domain, spec)),
            GaugeSpec::MonopolePhase { k } => {
                if spec.kind() != GroupKind::U1 {
                    return Err(scene_err("monopole_phase needs group U1"));
                }
                Ok(presets::monopole_phase(domain, *k))
            }
            GaugeSpec::ExpPoly { coeffs } => presets::exp_poly_gauge(domain, spec, coeffs),
            GaugeSpec::GaugeQuotient { hi, hj } => {
                let hi = presets::exp_poly_gauge(domain.clone(), spec, hi)?;
                let hj = presets::exp_poly_gauge(domain.clone(), spec, hj)?;
                Ok(presets::gauge_quotient(domain, &hi, &hj))
            }
        }
    }
}

impl PathSpec {
    fn param(&self, name: &str, default: Option<f64>) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .or(default)
            .ok_or_else(|| scene_err(format!("{:?} path needs parameter {name}", self.preset)))
    }

    fn check_params(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(scene_err(format!("unknown {:?} path parameter {k}", self.preset))),
            None => Ok(()),
        }
    }

    pub fn build(&self, manifold: Manifold) -> Result<Path> {
        let on_sphere = || {
            if manifold == Manifold::sphere() {
                Ok(())
            } else {
                Err(scene_err(format!("{:?} paths live on the sphere", self.preset)))
            }
        };
        if self.preset != PathPreset::Waypoints && !self.waypoints.is_empty() {
            return Err(scene_err("only waypoint paths take waypoints"));
        }
        match self.preset {
            PathPreset::Latitude => {
                on_sphere()?;
                self.check_params(&["theta", "phi0"])?;
                Ok(Path::latitude(self.param("theta", None)?, self.param("phi0", Some(0.0))?))
            }
            PathPreset::Meridian => {
                on_sphere()?;
                self.check_params(&["phi", "theta_start", "theta_end"])?;
                Ok(Path::meridian(
                    self.param("phi", Some(0.0))?,
                    self.param("theta_start", None)?,
                    self.param("theta_end", None)?,
                ))
            }
            PathPreset::Equator => {
                on_sphere()?;
                self.check_params(&[])?;
                Ok(Path::equator())
            }
            PathPreset::Waypoints => {
                self.check_params(&[])?;
                let points: Vec<Point> = self.waypoints.iter().map(|p| vec3(*p)).collect();
                for p in &points {
                    if !manifold.contains(p) {
                        return Err(scene_err(format!("waypoint {p:?} is not on the manifold")));
                    }
                }
                Path::waypoints(manifold, &points)
            }
        }
    }
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| scene_err(format!("parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene specs serialize") + "\n"
    }

    pub fn build(&self) -> Result<Scene> {
        let cover = self.cocycle.cover();
        let manifold = cover.manifold();
        if self.cocycle.forms.len() != cover.len() {
            return Err(scene_err(format!(
                "cover has {} sets but {} forms were given",
                cover.len(),
                self.cocycle.forms.len()
            )));
        }
        let forms = cover
            .sets()
            .iter()
            .zip(&self.cocycle.forms)
            .map(|(set, f)| {
                let domain = Domain::Set(set.clone());
                let form = f.connection.build(domain.clone(), self.group)?;
                match &f.gauge {
                    Some(coeffs) => Ok(gauge_transform(
                        &form,
                        &presets::exp_poly_gauge(domain, self.group, coeffs)?,
                    )),
                    None => Ok(form),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut transitions = BTreeMap::new();
        for t in &self.cocycle.transitions {
            if t.i >= cover.len() || t.j >= cover.len() || t.i == t.j {
                return Err(scene_err(format!("transition ({}, {}) does not name two sets", t.i, t.j)));
            }
            let g = t.gauge.build(Domain::Manifold(manifold), self.group)?;
            if transitions.insert((t.i, t.j), g).is_some() {
                return Err(scene_err(format!("transition ({}, {}) given twice", t.i, t.j)));
            }
        }
        let cocycle = DifferentialCocycle::new(cover, self.group, forms, transitions)?;
        let paths = self
            .paths
            .iter()
            .map(|(name, p)| Ok((name.clone(), p.build(manifold)?)))
            .collect::<Result<_>>()?;
        let gauge = self
            .gauge
            .as_ref()
            .map(|g| g.build(Domain::Manifold(manifold), self.group))
            .transpose()?;
        let probe = match &self.probe {
            Some(p) => {
                let point = vec3(p.point);
                if !manifold.contains(&point) {
                    return Err(scene_err("probe point is not on the manifold"));
                }
                cocycle.cover().set(p.set)?;
                Some((point, manifold.project_tangent(&point, &vec3(p.v)), manifold.project_tangent(&point, &vec3(p.w)), p.set))
            }
            None => None,
        };
        Ok(Scene {
            spec: self.clone(),
            cocycle,
            paths,
            gauge,
            probe,
        })
    }

    /// The scene of a built-in preset.
    pub fn preset(name: &str) -> Result<Self> {
        let sphere_paths = || {
            let mut paths = BTreeMap::new();
            paths.insert("equator".to_string(), path(PathPreset::Equator, &[], vec![]));
            for (label, theta) in [("lat60", std::f64::consts::FRAC_PI_3), ("lat120", 2.0 * std::f64::consts::FRAC_PI_3)] {
                paths.insert(label.to_string(), path(PathPreset::Latitude, &[("theta", theta)], vec![]));
            }
            paths.insert(
                "meridian".to_string(),
                path(PathPreset::Meridian, &[("phi", 0.4), ("theta_start", 0.3), ("theta_end", 2.8)], vec![]),
            );
            paths.insert(
                "arc".to_string(),
                path(
                    PathPreset::Waypoints,
                    &[],
                    vec![[0.6, 0.0, 0.8], [0.0, 1.0, 0.0], [-0.6, 0.0, -0.8]],
                ),
            );
            paths
        };
        let plane_paths = || {
            let mut paths = BTreeMap::new();
            paths.insert(
                "any".to_string(),
                path(PathPreset::Waypoints, &[], vec![[-1.2, -0.9, 0.0], [0.3, 0.4, 0.0], [1.1, 1.3, 0.0]]),
            );
            paths.insert(
                "loop".to_string(),
                path(
                    PathPreset::Waypoints,
                    &[],
                    vec![[0.3, 0.2, 0.0], [1.0, 0.4, 0.0], [0.6, 1.0, 0.0], [0.3, 0.2, 0.0]],
                ),
            );
            paths.insert(
                "loop2".to_string(),
                path(
                    PathPreset::Waypoints,
                    &[],
                    vec![[0.3, 0.2, 0.0], [-0.5, 0.9, 0.0], [-0.8, -0.3, 0.0], [0.3, 0.2, 0.0]],
                ),
            );
            paths
        };
        let sphere_probe = || {
            let (theta, phi) = (std::f64::consts::FRAC_PI_2, 0.3);
            let p = partrans::geometry::sphere_point(theta, phi);
            let (v, w) = partrans::geometry::sphere_coordinate_fields(&p);
            ProbeSpec {
                point: p.into(),
                v: v.into(),
                w: w.into(),
                set: 0,
            }
        };
        let plane_probe = |set: usize| ProbeSpec {
            point: [0.7, 0.6, 0.0],
            v: [1.0, 0.0, 0.0],
            w: [0.0, 1.0, 0.0],
            set,
        };
        let u1_gauge = GaugeSpec::ExpPoly {
            coeffs: vec![[0.2, 0.5, -0.3, 0.4, 0.1, 0.0, -0.2, 0.0, 0.15, 0.0]],
        };
        let su2_gauge = GaugeSpec::ExpPoly {
            coeffs: presets::plane_grid_gauge_coeffs(5),
        };
        let monopole = |form_k: f64, phase_k: f64| SceneSpec {
            group: GroupSpec::u1(),
            cocycle: CocycleSpec {
                cover: CoverKind::TwoCaps,
                overlap: Some(presets::MONOPOLE_OVERLAP),
                forms: vec![form(ConnectionSpec::Monopole { k: form_k }, None); 2],
                transitions: vec![TransitionSpec {
                    i: 0,
                    j: 1,
                    gauge: GaugeSpec::MonopolePhase { k: phase_k },
                }],
            },
            paths: sphere_paths(),
            gauge: Some(u1_gauge.clone()),
            probe: Some(sphere_probe()),
            solver: SolverConfig::default(),
            seed: 42,
        };
        let su2_grid = || {
            let grid = presets::plane_grid_gauge_coeffs;
            let mut transitions = Vec::new();
            for i in 0..4 {
                for j in i + 1..4 {
                    transitions.push(TransitionSpec {
                        i,
                        j,
                        gauge: GaugeSpec::GaugeQuotient { hi: grid(i), hj: grid(j) },
                    });
                }
            }
            SceneSpec {
                group: GroupSpec::su2(),
                cocycle: CocycleSpec {
                    cover: CoverKind::PlaneGrid,
                    overlap: Some(presets::PLANE_GRID_OVERLAP),
                    forms: (0..4)
                        .map(|i| form(ConnectionSpec::Polynomial { coeffs: presets::su2_bench_coeffs() }, Some(grid(i))))
                        .collect(),
                    transitions,
                },
                paths: plane_paths(),
                gauge: Some(su2_gauge.clone()),
                probe: Some(plane_probe(3)),
                solver: SolverConfig::default(),
                seed: 42,
            }
        };
        Ok(match name {
            "trivial" => SceneSpec {
                cocycle: CocycleSpec {
                    forms: vec![form(ConnectionSpec::Zero, None); 2],
                    transitions: vec![TransitionSpec {
                        i: 0,
                        j: 1,
                        gauge: GaugeSpec::Identity,
                    }],
                    ..monopole(0.0, 0.0).cocycle
                },
                ..monopole(0.0, 0.0)
            },
            "monopole_k1" => monopole(1.0, 1.0),
            "monopole_k2" => monopole(2.0, 2.0),
            "monopole_k3" => monopole(3.0, 3.0),
            "monopole_corrupt" => monopole(1.5, 1.0),
            "su2_poly_bench" => su2_grid(),
            "pure_gauge_su2" => {
                let mut s = su2_grid();
                s.cocycle.forms = vec![form(ConnectionSpec::PureGauge { coeffs: presets::pure_gauge_coeffs() }, None); 4];
                s.cocycle.transitions = (0..4)
                    .flat_map(|i| (i + 1..4).map(move |j| TransitionSpec { i, j, gauge: GaugeSpec::Identity }))
                    .collect();
                s
            }
            "plane_constant" => SceneSpec {
                group: GroupSpec::su2(),
                cocycle: CocycleSpec {
                    cover: CoverKind::PlaneSingle,
                    overlap: None,
                    forms: vec![form(
                        ConnectionSpec::Constant {
                            x: matrix_to_spec(presets::plane_constant_generator().mat()),
                            covector: [1.0, 0.0, 0.0],
                        },
                        None,
                    )],
                    transitions: vec![],
                },
                paths: plane_paths(),
                gauge: Some(su2_gauge),
                probe: Some(plane_probe(0)),
                solver: SolverConfig::default(),
                seed: 42,
            },
            "empty" => SceneSpec {
                group: GroupSpec::su2(),
                cocycle: CocycleSpec {
                    cover: CoverKind::PlaneSingle,
                    overlap: None,
                    forms: vec![form(ConnectionSpec::Zero, None)],
                    transitions: vec![],
                },
                paths: plane_paths(),
                gauge: None,
                probe: Some(plane_probe(0)),
                solver: SolverConfig::default(),
                seed: 42,
            },
            other => return Err(scene_err(format!("unknown preset {other}"))),
        })
    }
}

fn form(connection: ConnectionSpec, gauge: Option<GaugeCoeffs>) -> FormSpec {
    FormSpec { connection, gauge }
}

fn path(preset: PathPreset, params: &[(&str, f64)], waypoints: Vec<[f64; 3]>) -> PathSpec {
    PathSpec {
        preset,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        waypoints,
    }
}

/// Scene names shipped under `scenes/`: the cocycle presets plus `empty`.
pub fn shipped_scene_names() -> Vec<&'static str> {
    presets::PRESET_NAMES.iter().copied().chain(["empty"]).collect()
}

/// Reads a scene file; a missing file whose stem names a built-in preset
/// falls back to that preset.
pub fn load_scene(file: &FsPath) -> Result<Scene> {
    match std::fs::read_to_string(file) {
        Ok(text) => SceneSpec::parse(&text)?.build(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            SceneSpec::preset(stem)
                .map_err(|_| scene_err(format!("{}: no such file or preset", file.display())))?
                .build()
        }
        Err(e) => Err(scene_err(format!("{}: {e}", file.display()))),
    }
}
