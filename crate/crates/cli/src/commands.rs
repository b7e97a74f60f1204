//! Command dispatch: every command produces one JSON record and an exit code.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use partrans::connection::check_path_in_domain;
use partrans::descent::{
    extract_descent, round_trip, verify_cocycle, verify_morphism, AnchorChoice, CocycleMorphism, GlobalTransport,
    MorphismTolerance,
};
use partrans::holonomy::{chern_number, small_loop_curvature, wilson_line};
use partrans::solver::{transport_local, SolverConfig, TransportOracle};
use partrans::{connection, Error, GroupElement, Result};
use serde_json::{json, Value};

use crate::report::{self, matrix};
use crate::scene::{load_scene, shipped_scene_names, Scene, SceneSpec};

/// Samples drawn by the cocycle check that precedes every command.
pub const PRECHECK_SAMPLES: usize = 256;

/// Pass threshold of the `gauge` command.
pub const GAUGE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "partrans", version, about = "Parallel transport, holonomy and descent data from scene files")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Path-ordered exponential of the form of the set containing the path.
    Transport(SceneArgs),
    /// Holonomy of a loop in the anchor trivialization at its basepoint.
    Holonomy(SceneArgs),
    /// Wilson line of a path across the cover.
    Wilson(SceneArgs),
    /// Triple and compatibility conditions on random overlap samples.
    CheckCocycle(SceneArgs),
    /// Checks the scene gauge as a morphism onto the gauge-transformed cocycle.
    CheckMorphism(SceneArgs),
    /// Compares Wilson lines before and after the scene gauge.
    Gauge(SceneArgs),
    /// Curvature of the probe set's form at the probe point.
    Curvature(SceneArgs),
    /// Curvature from the holonomy of a small chart rectangle at the probe.
    SmallLoop(SceneArgs),
    /// Chern number of a U(1) cocycle on the sphere.
    Chern(SceneArgs),
    /// Local data recovered from the global transport.
    Extract(SceneArgs),
    /// Reconstruct, extract and compare with the source cocycle.
    Roundtrip(SceneArgs),
    /// Prints the scene file of a built-in preset.
    Preset {
        name: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Lists the built-in presets.
    Presets,
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene file; a missing file named after a preset loads that preset.
    #[arg(value_name = "SCENE", required_unless_present = "scene")]
    pub scene_file: Option<PathBuf>,
    /// Scene file, as an option.
    #[arg(long, value_name = "FILE", conflicts_with = "scene_file")]
    pub scene: Option<PathBuf>,
    /// Name of a path declared in the scene.
    #[arg(long)]
    pub path: Option<String>,
    /// Random samples for checks, extraction and round trips.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Overrides the scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides the solver base step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides the number of step doublings.
    #[arg(long = "max-refine")]
    pub max_refine: Option<usize>,
    /// Side of the small-loop rectangle.
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    /// Preferred anchor set.
    #[arg(long)]
    pub anchor: Option<usize>,
    /// Skip the cocycle check that precedes the command.
    #[arg(long)]
    pub skip_verify: bool,
    /// Write the report here (atomically) instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Exit status and report of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub record: Value,
}

impl Outcome {
    fn checked(pass: bool, record: Value) -> Self {
        Self {
            code: if pass { 0 } else { 1 },
            record,
        }
    }

    fn ok(record: Value) -> Self {
        Self { code: 0, record }
    }

    fn input_error(err: &Error) -> Self {
        Self {
            code: 2,
            record: json!({ "error": err.to_string() }),
        }
    }
}

struct Context {
    name: &'static str,
    scene: Scene,
    cfg: SolverConfig,
    seed: u64,
    anchors: AnchorChoice,
    args: SceneArgs,
}

impl Context {
    fn path(&self) -> Result<(&str, &partrans::geometry::Path)> {
        let name = self
            .args
            .path
            .as_deref()
            .ok_or_else(|| Error::Scene(format!("{} needs --path", self.name)))?;
        let path = self.scene.paths.get(name).ok_or_else(|| {
            let known: Vec<&String> = self.scene.paths.keys().collect();
            Error::Scene(format!("unknown path {name}; the scene declares {known:?}"))
        })?;
        Ok((name, path))
    }

    fn probe(&self) -> Result<(partrans::geometry::Point, partrans::geometry::Tangent, partrans::geometry::Tangent, usize)> {
        self.scene
            .probe
            .ok_or_else(|| Error::Scene(format!("{} needs a probe in the scene", self.name)))
    }

    fn gauge(&self) -> Result<&connection::GaugeFunction> {
        self.scene
            .gauge
            .as_ref()
            .ok_or_else(|| Error::Scene(format!("{} needs a gauge in the scene", self.name)))
    }

    fn samples(&self, default: usize) -> usize {
        self.args.samples.unwrap_or(default)
    }

    fn base(&self) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("command".into(), json!(self.name));
        m
    }
}

fn with(mut base: serde_json::Map<String, Value>, extra: Value) -> Value {
    if let Value::Object(e) = extra {
        base.extend(e);
    }
    Value::Object(base)
}

fn solver_config(scene: &SceneSpec, args: &SceneArgs) -> Result<SolverConfig> {
    let base = scene.solver;
    SolverConfig::new(
        args.steps.unwrap_or(base.base_steps()),
        args.tol.unwrap_or(base.tol()),
        args.max_refine.unwrap_or(base.max_refinements()),
    )
}

fn setup(name: &'static str, args: SceneArgs) -> Result<Context> {
    let file = args
        .scene_file
        .clone()
        .or_else(|| args.scene.clone())
        .ok_or_else(|| Error::Scene("no scene given".into()))?;
    let scene = load_scene(&file)?;
    let cfg = solver_config(&scene.spec, &args)?;
    let seed = args.seed.unwrap_or(scene.spec.seed);
    let anchors = match args.anchor {
        Some(set) => {
            scene.cocycle.cover().set(set)?;
            AnchorChoice::prefer(set)
        }
        None => AnchorChoice::max_clearance(),
    };
    Ok(Context {
        name,
        scene,
        cfg,
        seed,
        anchors,
        args,
    })
}

fn precheck(cx: &Context) -> Result<Option<Outcome>> {
    if cx.args.skip_verify {
        return Ok(None);
    }
    let r = verify_cocycle(&cx.scene.cocycle, PRECHECK_SAMPLES, cx.seed)?;
    if r.pass {
        return Ok(None);
    }
    Ok(Some(Outcome {
        code: 2,
        record: json!({
            "error": "scene cocycle fails verification; rerun with --skip-verify to proceed",
            "verification": r,
        }),
    }))
}

fn transport_cmd(cx: &Context) -> Result<Outcome> {
    let (name, path) = cx.path()?;
    let c = &cx.scene.cocycle;
    let set = c
        .forms()
        .iter()
        .position(|f| check_path_in_domain(f, path, 0.0, 1.0).is_ok())
        .ok_or_else(|| Error::Scene(format!("path {name} is not contained in a single cover set; use wilson")))?;
    let r = transport_local(&c.forms()[set], path, &cx.cfg)?;
    Ok(Outcome::ok(with(
        cx.base(),
        json!({
            "path": name,
            "set": set,
            "transport": matrix(r.value.mat()),
            "estimated_error": r.estimated_error,
            "steps_used": r.steps_used,
        }),
    )))
}

fn wilson_cmd(cx: &Context) -> Result<Outcome> {
    let (name, path) = cx.path()?;
    let c = &cx.scene.cocycle;
    let w = wilson_line(c, path, &cx.anchors, &cx.cfg)?;
    Ok(Outcome::ok(with(
        cx.base(),
        json!({
            "path": name,
            "wilson": matrix(w.mat()),
            "anchor_start": cx.anchors.set_for(c.cover(), &path.start())?,
            "anchor_end": cx.anchors.set_for(c.cover(), &path.end())?,
            "tol": cx.cfg.tol(),
        }),
    )))
}

fn holonomy_cmd(cx: &Context) -> Result<Outcome> {
    let (name, path) = cx.path()?;
    if !path.is_loop() {
        return Err(Error::BasepointMismatch {
            gap: (path.end() - path.start()).norm(),
        });
    }
    let c = &cx.scene.cocycle;
    let h = wilson_line(c, path, &cx.anchors, &cx.cfg)?;
    Ok(Outcome::ok(with(
        cx.base(),
        json!({
            "path": name,
            "holonomy": matrix(h.mat()),
            "anchor": cx.anchors.set_for(c.cover(), &path.start())?,
            "tol": cx.cfg.tol(),
        }),
    )))
}

fn check_cocycle_cmd(cx: &Context) -> Result<Outcome> {
    let r = verify_cocycle(&cx.scene.cocycle, cx.samples(1000), cx.seed)?;
    Ok(Outcome::checked(r.pass, with(cx.base(), serde_json::to_value(&r).expect("report"))))
}

fn check_morphism_cmd(cx: &Context) -> Result<Outcome> {
    let c = &cx.scene.cocycle;
    let h = CocycleMorphism::from_global(c, cx.gauge()?);
    let c2 = c.gauge_transform(&h)?;
    let r = verify_morphism(&h, c, &c2, cx.samples(1000), cx.seed, MorphismTolerance::default())?;
    Ok(Outcome::checked(r.pass, with(cx.base(), serde_json::to_value(&r).expect("report"))))
}

fn gauge_cmd(cx: &Context) -> Result<Outcome> {
    let (name, path) = cx.path()?;
    let c = &cx.scene.cocycle;
    let g = cx.gauge()?;
    let c2 = c.gauge_transform(&CocycleMorphism::from_global(c, g))?;
    let w = wilson_line(c, path, &cx.anchors, &cx.cfg)?;
    let w2 = wilson_line(&c2, path, &cx.anchors, &cx.cfg)?;
    let expected: GroupElement = &(&g.eval(&path.end())? * &w) * &g.eval(&path.start())?.inverse();
    let deviation = w2.distance(&expected);
    Ok(Outcome::checked(
        deviation <= GAUGE_TOL,
        with(
            cx.base(),
            json!({
                "path": name,
                "wilson": matrix(w.mat()),
                "gauged_wilson": matrix(w2.mat()),
                "deviation": deviation,
                "pass": deviation <= GAUGE_TOL,
            }),
        ),
    ))
}

fn curvature_cmd(cx: &Context) -> Result<Outcome> {
    let (p, v, w, set) = cx.probe()?;
    let k = connection::curvature(cx.scene.cocycle.form(set)?, &p, &v, &w)?;
    Ok(Outcome::ok(with(
        cx.base(),
        json!({ "set": set, "point": [p.x, p.y, p.z], "curvature": matrix(k.mat()) }),
    )))
}

fn small_loop_cmd(cx: &Context) -> Result<Outcome> {
    let (p, v, w, set) = cx.probe()?;
    let c = &cx.scene.cocycle;
    let r = small_loop_curvature(c, set, &p, &v, &w, cx.args.eps, &cx.anchors, &cx.cfg)?;
    let k = connection::curvature(c.form(set)?, &p, &v, &w)?;
    let anchor = cx.anchors.set_for(c.cover(), &r.corner)?;
    // The reference is expressed in the anchor trivialization at the centre.
    let anchor_centre = cx.anchors.set_for(c.cover(), &p)?;
    let k_anchor = if anchor_centre == set {
        k.clone()
    } else {
        partrans::lie::adjoint(&c.transition_at(set, anchor_centre, &p)?, &k)
    };
    Ok(Outcome::ok(with(
        cx.base(),
        json!({
            "set": set,
            "eps": cx.args.eps,
            "estimate": matrix(r.estimate.mat()),
            "centered": matrix(r.centered.mat()),
            "corner": [r.corner.x, r.corner.y, r.corner.z],
            "corner_anchor": anchor,
            "curvature": matrix(k_anchor.mat()),
            "deviation": (&r.centered - &k_anchor).norm(),
        }),
    )))
}

fn chern_cmd(cx: &Context) -> Result<Outcome> {
    let value = chern_number(&cx.scene.cocycle)?;
    Ok(Outcome::ok(with(
        cx.base(),
        json!({ "chern": value, "nearest_integer": value.round(), "deviation": (value - value.round()).abs() }),
    )))
}

fn oracle(cx: &Context) -> Arc<dyn TransportOracle> {
    Arc::new(GlobalTransport {
        cocycle: cx.scene.cocycle.clone(),
        anchors: cx.anchors.clone(),
        cfg: cx.cfg,
    })
}

fn extract_cmd(cx: &Context) -> Result<Outcome> {
    let c = &cx.scene.cocycle;
    let extracted = extract_descent(oracle(cx), c.cover())?;
    let mut r = verify_cocycle(&extracted, cx.samples(4), cx.seed)?;
    let tol = MorphismTolerance::round_trip();
    r.pass = r.max_triple <= tol.transition && r.max_compat <= tol.form;
    let mut probe = Value::Null;
    if let Some((p, v, w, set)) = cx.scene.probe {
        let form = extracted.form(set)?;
        let mut transitions = Vec::new();
        for j in 0..c.cover().len() {
            if j != set && c.cover().set(j)?.contains(&p) {
                let g = extracted.transition_at(set, j, &p)?;
                transitions.push(json!({ "i": set, "j": j, "value": matrix(g.mat()) }));
            }
        }
        probe = json!({
            "set": set,
            "point": [p.x, p.y, p.z],
            "form_v": matrix(form.eval(&p, &v)?.mat()),
            "form_w": matrix(form.eval(&p, &w)?.mat()),
            "transitions": transitions,
        });
    }
    Ok(Outcome::checked(
        r.pass,
        with(cx.base(), json!({ "verification": r, "probe": probe, "pass": r.pass })),
    ))
}

fn roundtrip_cmd(cx: &Context) -> Result<Outcome> {
    let r = round_trip(&cx.scene.cocycle, &cx.anchors, &cx.cfg, cx.samples(4), cx.seed)?;
    Ok(Outcome::checked(
        r.pass,
        with(
            cx.base(),
            json!({ "cocycle": r.cocycle, "morphism": r.morphism, "pass": r.pass }),
        ),
    ))
}

fn run_scene(name: &'static str, args: SceneArgs, f: fn(&Context) -> Result<Outcome>) -> (Outcome, Option<PathBuf>) {
    let output = args.output.clone();
    let outcome = (|| {
        let cx = setup(name, args)?;
        if name != "check-cocycle" {
            if let Some(fail) = precheck(&cx)? {
                return Ok(fail);
            }
        }
        f(&cx)
    })();
    (outcome.unwrap_or_else(|e| Outcome::input_error(&e)), output)
}

/// Writes `text` to `file` through a sibling temporary file and a rename.
pub fn write_atomic(file: &std::path::Path, text: &str) -> std::io::Result<()> {
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(file).map_err(|e| e.error)?;
    Ok(())
}

/// Runs one command; returns the exit code and the rendered report.
pub fn execute(cli: Cli) -> (i32, String, Option<PathBuf>) {
    let (outcome, output) = match cli.command {
        Command::Transport(a) => run_scene("transport", a, transport_cmd),
        Command::Holonomy(a) => run_scene("holonomy", a, holonomy_cmd),
        Command::Wilson(a) => run_scene("wilson", a, wilson_cmd),
        Command::CheckCocycle(a) => run_scene("check-cocycle", a, check_cocycle_cmd),
        Command::CheckMorphism(a) => run_scene("check-morphism", a, check_morphism_cmd),
        Command::Gauge(a) => run_scene("gauge", a, gauge_cmd),
        Command::Curvature(a) => run_scene("curvature", a, curvature_cmd),
        Command::SmallLoop(a) => run_scene("small-loop", a, small_loop_cmd),
        Command::Chern(a) => run_scene("chern", a, chern_cmd),
        Command::Extract(a) => run_scene("extract", a, extract_cmd),
        Command::Roundtrip(a) => run_scene("roundtrip", a, roundtrip_cmd),
        Command::Preset { name, output } => {
            return match SceneSpec::preset(&name) {
                Ok(spec) => (0, spec.to_json(), output),
                Err(e) => (2, report::render(&Outcome::input_error(&e).record), None),
            };
        }
        Command::Presets => {
            let names = shipped_scene_names().join("\n") + "\n";
            return (0, names, None);
        }
    };
    (outcome.code, report::render(&outcome.record), output)
}
