//! Command implementations behind the `latdef` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use lattice_defects::cloak::{self, CloakConstraint, CloakRequest};
use lattice_defects::forward::oracle::brute_force_oracle;
use lattice_defects::inverse::{self, InverseOptions};
use lattice_defects::scene::{load_scene, save_scene};
use lattice_defects::{doc, Complex64, DefectVector, Error, GreenConfig, Model, Scene, Site};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Green,
    Forward,
    Oracle,
    Invert,
    Cloak,
    Field,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::Forward => "forward",
            Command::Oracle => "oracle",
            Command::Invert => "invert",
            Command::Cloak => "cloak",
            Command::Field => "field",
        }
    }

    /// Module and operation reported when the command fails.
    fn operation(&self) -> (&'static str, &'static str) {
        match self {
            Command::Green => ("brillouin", "green_coeff"),
            Command::Forward => ("forward", "solve_forward"),
            Command::Oracle => ("forward", "brute_force_oracle"),
            Command::Invert => ("inverse", "intersect_manifolds"),
            Command::Cloak => ("cloak", "design_cloak"),
            Command::Field => ("forward", "solve_forward"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rank: f64,
    pub cons: f64,
    pub ver: f64,
    pub adm: f64,
    pub den: f64,
    pub floor: f64,
    pub cloak: f64,
    pub im: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let inv = InverseOptions::default();
        Tolerances {
            rank: inv.rank_tol,
            cons: inv.cons_tol,
            ver: inv.ver_tol,
            adm: lattice_defects::forward::DEFAULT_ADMISSIBILITY_TOL,
            den: inv.den_tol,
            floor: lattice_defects::brillouin::DEFAULT_SINGULAR_FLOOR,
            cloak: cloak::DEFAULT_CLOAK_TOL,
            im: inv.im_tol,
        }
    }
}

impl Tolerances {
    fn check(&self) -> Result<(), String> {
        let all = [
            ("rank", self.rank),
            ("cons", self.cons),
            ("ver", self.ver),
            ("adm", self.adm),
            ("den", self.den),
            ("floor", self.floor),
            ("cloak", self.cloak),
            ("im", self.im),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("--tol-{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub scene: PathBuf,
    pub out: Option<PathBuf>,
    pub order: Option<usize>,
    pub radius: Option<i64>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
    /// `green`: also tabulate every canonical offset with components up to this value.
    pub offset_box: Option<i64>,
    /// `invert` / `cloak`: box prior `[0, bound]` on the perturbations.
    pub bound: Option<f64>,
    /// `cloak`: require real perturbations.
    pub real: bool,
    /// `green`: preload a table dump before evaluating.
    pub load_table: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, scene: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            scene: scene.into(),
            out: None,
            order: None,
            radius: None,
            seed: 0,
            threads: None,
            tolerances: Tolerances::default(),
            offset_box: None,
            bound: None,
            real: false,
            load_table: None,
        }
    }

    fn inverse_options(&self) -> InverseOptions {
        InverseOptions {
            rank_tol: self.tolerances.rank,
            cons_tol: self.tolerances.cons,
            ver_tol: self.tolerances.ver,
            den_tol: self.tolerances.den,
            im_tol: self.tolerances.im,
            seed: self.seed,
            ..InverseOptions::default()
        }
    }
}

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub module: &'static str,
    pub operation: &'static str,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn input(module: &'static str, operation: &'static str, message: impl Into<String>) -> Self {
        CliError {
            exit_code: 1,
            module,
            operation,
            kind: "InputError".into(),
            message: message.into(),
        }
    }

    fn from_error(module: &'static str, operation: &'static str, err: Error) -> Self {
        CliError {
            exit_code: if err.is_input_error() { 1 } else { 2 },
            module,
            operation,
            kind: err.kind().into(),
            message: err.to_string(),
        }
    }

    pub fn document(&self) -> String {
        doc::to_text(&doc::object(vec![(
            "error",
            doc::object(vec![
                ("module", Value::from(self.module)),
                ("operation", Value::from(self.operation)),
                ("kind", Value::from(self.kind.as_str())),
                ("message", Value::from(self.message.as_str())),
                ("exit_code", Value::from(self.exit_code)),
            ]),
        )]))
    }
}

fn load(cfg: &RunConfig) -> Result<Scene, CliError> {
    let text = fs::read_to_string(&cfg.scene).map_err(|e| {
        CliError::input(
            "scene",
            "load_scene",
            format!("{}: {e}", cfg.scene.display()),
        )
    })?;
    load_scene(&text).map_err(|e| CliError::from_error("scene", "load_scene", e))
}

fn build_model(cfg: &RunConfig, scene: Scene) -> Result<Model, CliError> {
    let (module, op) = cfg.command.operation();
    let config = GreenConfig {
        order: cfg.order,
        singular_floor: cfg.tolerances.floor,
    };
    let mut model = Model::new(scene, config).map_err(|e| {
        let op = if matches!(e, Error::NearSingularSymbol { .. }) {
            ("brillouin", "green_coeff")
        } else {
            (module, op)
        };
        CliError::from_error(op.0, op.1, e)
    })?;
    model.adm_tol = cfg.tolerances.adm;
    Ok(model)
}

fn defects_or_zero(scene: &Scene) -> DefectVector {
    scene
        .defects
        .clone()
        .unwrap_or_else(|| DefectVector::zeros(scene.num_defects()))
}

fn resolve_radius(cfg: &RunConfig, scene: &Scene, default_min: i64) -> Result<i64, CliError> {
    let needed = scene.max_coordinate() + 5;
    let (module, op) = cfg.command.operation();
    match cfg.radius {
        Some(r) if r < needed => Err(CliError::input(
            module,
            op,
            format!("--radius {r} must be at least max site coordinate + 5 = {needed}"),
        )),
        Some(r) => Ok(r),
        None => Ok(needed.max(default_min)),
    }
}

fn write_site(out: &mut String, site: &Site) {
    for c in &site.0 {
        let _ = write!(out, "{c} ");
    }
}

fn write_value(out: &mut String, z: Complex64) {
    let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
}

/// Plot-ready grid: one block per frequency, rows `x [y ...] re im`.
pub fn grid_text(scene: &Scene, sites: &[Site], values: &[Vec<Complex64>]) -> String {
    let mut out = String::new();
    for (j, vals) in values.iter().enumerate() {
        if j > 0 {
            out.push('\n');
        }
        let w = scene.frequencies[j].effective();
        let _ = writeln!(
            out,
            "# freq_index {} omega {:.16e} {:.16e}",
            j + 1,
            w.re,
            w.im
        );
        for (site, z) in sites.iter().zip(vals) {
            write_site(&mut out, site);
            write_value(&mut out, *z);
        }
    }
    out
}

fn box_sites(dim: usize, radius: i64) -> Vec<Site> {
    let w = (2 * radius + 1) as usize;
    (0..w.pow(dim as u32))
        .map(|flat| {
            let mut rem = flat;
            let mut c = vec![0i64; dim];
            for axis in (0..dim).rev() {
                c[axis] = (rem % w) as i64 - radius;
                rem /= w;
            }
            Site(c)
        })
        .collect()
}

/// Run one command and return the text of its output document.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.tolerances
        .check()
        .map_err(|m| CliError::input("cli", "run", m))?;
    let scene = load(cfg)?;
    let (module, op) = cfg.command.operation();
    let fail = |e: Error| CliError::from_error(module, op, e);

    match cfg.command {
        Command::Green => {
            let model = build_model(cfg, scene)?;
            if let Some(path) = &cfg.load_table {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::input(module, "load_table", format!("{}: {e}", path.display()))
                })?;
                model.table().load_dump(&text).map_err(fail)?;
            }
            if let Some(k) = cfg.offset_box {
                if k < 0 {
                    return Err(CliError::input(module, op, "--box must be non-negative"));
                }
                let offsets: Vec<Site> = box_sites(model.scene().dimension, k)
                    .into_iter()
                    .filter(|s| s.0.iter().all(|&c| c >= 0))
                    .collect();
                for j in 0..model.scene().num_frequencies() {
                    model.table().prefetch(j, &offsets).map_err(fail)?;
                }
            }
            Ok(model.table().dump())
        }
        Command::Forward => {
            let model = build_model(cfg, scene)?;
            let defects = defects_or_zero(model.scene());
            let meas = model.predict_receivers(&defects).map_err(fail)?;
            let mut out = model.scene().clone();
            out.measurements = Some(meas);
            Ok(save_scene(&out))
        }
        Command::Oracle => {
            let radius = resolve_radius(cfg, &scene, 40)?;
            let defects = defects_or_zero(&scene);
            let field = brute_force_oracle(&scene, &defects, radius).map_err(fail)?;
            let sites: Vec<Site> = field.sites().collect();
            let values: Vec<Vec<Complex64>> = field
                .values
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect();
            Ok(grid_text(&scene, &sites, &values))
        }
        Command::Field => {
            let radius = resolve_radius(cfg, &scene, 0)?;
            let model = build_model(cfg, scene)?;
            let defects = defects_or_zero(model.scene());
            let sites = box_sites(model.scene().dimension, radius);
            let sol = model.solve_forward(&defects, &sites).map_err(fail)?;
            let values: Vec<Vec<Complex64>> = sol
                .fields
                .iter()
                .map(|f| f.amplitudes.iter().copied().collect())
                .collect();
            Ok(grid_text(model.scene(), &sites, &values))
        }
        Command::Invert => {
            let meas = scene
                .measurements
                .clone()
                .ok_or_else(|| CliError::input(module, op, "scene document has no measurements"))?;
            let model = build_model(cfg, scene)?;
            let opts = cfg.inverse_options();
            let mut result = inverse::recover(&model, &meas, &opts).map_err(fail)?;
            if let Some(b) = cfg.bound {
                result.candidates = inverse::box_filter(&result.candidates, b, opts.im_tol);
            }
            let mut report = inverse::recovery_report(&result);
            if let (Some(b), Value::Object(map)) = (cfg.bound, &mut report) {
                map.insert("box_bound".into(), doc::sci(b));
            }
            Ok(doc::to_text(&report))
        }
        Command::Cloak => {
            let model = build_model(cfg, scene)?;
            let opts = cfg.inverse_options();
            let req = CloakRequest {
                constraint: CloakConstraint {
                    real: cfg.real,
                    bound: cfg.bound,
                },
                cloak_tol: cfg.tolerances.cloak,
                ..CloakRequest::default()
            };
            match cloak::design_cloak(&model, &req, &opts) {
                Ok(design) => Ok(doc::to_text(&cloak::cloak_report(&design))),
                Err(Error::NoCandidate(msg)) => Ok(doc::to_text(&doc::object(vec![
                    ("status", Value::from("NO_CANDIDATE")),
                    ("seed", Value::from(cfg.seed)),
                    ("message", Value::from(msg)),
                ]))),
                Err(e) => Err(fail(e)),
            }
        }
    }
}

/// Run a command, writing the output to `--out` or returning it for stdout.
pub fn run(cfg: &RunConfig) -> Result<Option<String>, CliError> {
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::input(
                "cli",
                "run",
                "--threads must be at least 1",
            ));
        }
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let text = execute(cfg)?;
    match &cfg.out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| CliError::input("cli", "run", format!("{}: {e}", path.display())))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
