//! Experiment driver: run configuration, the shipped setups and output files.
//!
//! A run writes `history.csv` (one row per loop), `indicators.csv` (one row
//! per loop and slab), `meta.txt` (the resolved configuration, itself a valid
//! config file) and optionally VTK files per loop and slab.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::adaptivity::{adaptive_loop, HistoryRow, LoopState, MarkingConfig};
use crate::error::{ConfigError, RunError};
use crate::estimator::{EstimatorConfig, EstimatorPart, Orders, PuKind, Variant};
use crate::fespace::TimeRule;
use crate::goals::{Goal, GoalKind};
use crate::mesh::{SlabMeshes, SpatialMesh, TemporalMesh};
use crate::problems::{config1, config1_average, config2, config3, CombustionParams, ParabolicProblem};
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Config1,
    Config2,
    Config3,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Config1, Experiment::Config2, Experiment::Config3];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Config1 => "config1",
            Experiment::Config2 => "config2",
            Experiment::Config3 => "config3",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Config1 => "heat equation, polynomial solution on the unit square, goal: space-time mean",
            Experiment::Config2 => "heat equation, rotating hill on the unit square, goal: space-time L2 error",
            Experiment::Config3 => "flame front in a channel with two cooled rods, goals: reaction rate (j1), rod species (j2)",
        }
    }

    pub fn default_goal(self) -> GoalKind {
        match self {
            Experiment::Config1 => GoalKind::Average,
            Experiment::Config2 => GoalKind::L2Error,
            Experiment::Config3 => GoalKind::ReactionRate,
        }
    }

    pub fn default_intervals(self) -> usize {
        match self {
            Experiment::Config1 => 1000,
            Experiment::Config2 => 100,
            Experiment::Config3 => 256,
        }
    }

    /// Temporal rule for the load; the Config 2 values are reproduced with
    /// the right endpoint rule.
    pub fn default_quadrature(self) -> TimeRule {
        match self {
            Experiment::Config2 => TimeRule::RightBox,
            _ => TimeRule::Midpoint,
        }
    }

    /// Problem and initial spatial mesh after `level` global refinements.
    pub fn setup(self, level: u32) -> (ParabolicProblem, SpatialMesh) {
        match self {
            Experiment::Config1 | Experiment::Config2 => {
                let n = 4u32 << level;
                let p = if self == Experiment::Config1 { config1(n) } else { config2(n) };
                let mesh = SpatialMesh::patched(p.grid.clone());
                (p, mesh)
            }
            Experiment::Config3 => {
                let p = config3(CombustionParams::default());
                let mut mesh = SpatialMesh::patched(p.grid.clone());
                for _ in 0..level {
                    mesh = mesh.refine_all();
                }
                (p, mesh)
            }
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}' (expected config1, config2, config3)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Global refinement in space and time every loop.
    Uniform,
    Adaptive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uniform => "uniform",
            Mode::Adaptive => "adaptive",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "adaptive" => Ok(Mode::Adaptive),
            _ => Err(format!("unknown mode '{s}' (expected uniform or adaptive)")),
        }
    }
}

/// Recognized keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "config1 | config2 | config3"),
    ("mode", "uniform | adaptive"),
    ("estimator", "primal | adjoint | full"),
    ("variant", "joint | split"),
    ("pu", "dg0 | cg1"),
    ("orders", "1/1 | 1/2 | 2/2"),
    ("M_init", "initial number of time intervals"),
    ("refinement", "global spatial refinements of the initial mesh"),
    ("goal", "avg | l2err | j1 | j2"),
    ("theta_t", "fraction of intervals refined"),
    ("theta_x", "fraction of cells refined per slab"),
    ("c", "equilibration factor"),
    ("loops", "number of solve-estimate passes"),
    ("quadrature", "midpoint | rightbox | simpson | gauss2 (load and residual f term)"),
    ("dof_budget", "stop after a pass with at least this many primal space-time dofs"),
    ("reference", "reference goal value J(u)"),
    ("output", "output directory"),
    ("vtk", "write VTK files per loop and slab (true | false)"),
    ("timing", "record wall times in history.csv (true | false)"),
    ("workers", "worker threads (0 = all cores)"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub mode: Mode,
    pub estimator: EstimatorPart,
    pub variant: Variant,
    pub pu: PuKind,
    pub orders: Orders,
    /// Unset values take the experiment's default.
    pub m_init: Option<usize>,
    pub refinement: u32,
    pub goal: Option<GoalKind>,
    pub theta_t: f64,
    pub theta_x: f64,
    pub c: f64,
    pub loops: usize,
    pub quadrature: Option<TimeRule>,
    pub dof_budget: Option<usize>,
    pub reference: Option<f64>,
    pub output: PathBuf,
    pub vtk: bool,
    pub timing: bool,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MarkingConfig::default();
        RunConfig {
            experiment: Experiment::Config1,
            mode: Mode::Uniform,
            estimator: EstimatorPart::Primal,
            variant: Variant::Split,
            pu: PuKind::Dg0,
            orders: Orders::MIXED,
            m_init: None,
            refinement: 0,
            goal: None,
            theta_t: m.theta_t,
            theta_x: m.theta_x,
            c: m.c,
            loops: 1,
            quadrature: None,
            dof_budget: None,
            reference: None,
            output: PathBuf::from("output"),
            vtk: false,
            timing: true,
            workers: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue { key: key.into(), msg: e.to_string() })
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "experiment" => self.experiment = parse(key, v)?,
            "mode" => self.mode = parse(key, v)?,
            "estimator" => self.estimator = parse(key, v)?,
            "variant" => self.variant = parse(key, v)?,
            "pu" => self.pu = parse(key, v)?,
            "orders" => self.orders = parse(key, v)?,
            "M_init" => self.m_init = Some(parse(key, v)?),
            "refinement" => self.refinement = parse(key, v)?,
            "goal" => self.goal = Some(parse(key, v)?),
            "theta_t" => self.theta_t = parse(key, v)?,
            "theta_x" => self.theta_x = parse(key, v)?,
            "c" => self.c = parse(key, v)?,
            "loops" => self.loops = parse(key, v)?,
            "quadrature" => self.quadrature = Some(parse(key, v)?),
            "dof_budget" => self.dof_budget = Some(parse(key, v)?),
            "reference" => self.reference = Some(parse(key, v)?),
            "output" => self.output = PathBuf::from(v),
            "vtk" => self.vtk = parse(key, v)?,
            "timing" => self.timing = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Malformed { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Apply `--key=value` command-line flags.
    pub fn apply_flags<S: AsRef<str>>(&mut self, flags: &[S]) -> Result<(), ConfigError> {
        for f in flags {
            let f = f.as_ref();
            let body = f.strip_prefix("--").ok_or_else(|| ConfigError::Malformed { line: 0, text: f.to_string() })?;
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Malformed { line: 0, text: f.to_string() })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Read a config file, then let `flags` override it.
    pub fn load<S: AsRef<str>>(path: &Path, flags: &[S]) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(&fs::read_to_string(path)?)?;
        c.apply_flags(flags)?;
        c.validate()?;
        Ok(c)
    }

    pub fn goal_kind(&self) -> GoalKind {
        self.goal.unwrap_or(self.experiment.default_goal())
    }

    pub fn intervals(&self) -> usize {
        self.m_init.unwrap_or(self.experiment.default_intervals())
    }

    pub fn load_rule(&self) -> TimeRule {
        self.quadrature.unwrap_or(self.experiment.default_quadrature())
    }

    pub fn marking(&self) -> MarkingConfig {
        match self.mode {
            Mode::Uniform => MarkingConfig { dof_budget: self.dof_budget, ..MarkingConfig::global(self.loops) },
            Mode::Adaptive => MarkingConfig {
                c: self.c,
                theta_t: self.theta_t,
                theta_x: self.theta_x,
                max_loops: self.loops,
                dof_budget: self.dof_budget,
            },
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            part: self.estimator,
            variant: self.variant,
            pu: self.pu,
            orders: self.orders,
            ..Default::default()
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { load_rule: self.load_rule(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let heat = self.experiment != Experiment::Config3;
        if self.pu == PuKind::Cg1 && !(heat && self.variant == Variant::Split && self.estimator == EstimatorPart::Primal) {
            return Err(ConfigError::Forbidden(
                "pu = cg1 requires a heat experiment (config1, config2) with variant = split and estimator = primal".into(),
            ));
        }
        let goal = self.goal_kind();
        let ok = match goal {
            GoalKind::Average => true,
            GoalKind::L2Error => heat,
            GoalKind::ReactionRate | GoalKind::RodSpecies => !heat,
        };
        if !ok {
            return Err(ConfigError::Forbidden(format!("goal = {goal} is not defined for experiment = {}", self.experiment)));
        }
        if self.intervals() == 0 {
            return Err(ConfigError::InvalidValue { key: "M_init".into(), msg: "must be positive".into() });
        }
        if self.refinement > 8 {
            return Err(ConfigError::InvalidValue { key: "refinement".into(), msg: "at most 8".into() });
        }
        // checked in either mode, so a file stays valid when the mode changes
        MarkingConfig {
            c: self.c,
            theta_t: self.theta_t,
            theta_x: self.theta_x,
            max_loops: self.loops,
            dof_budget: self.dof_budget,
        }
        .validate()
    }

    /// Reference goal value: given, or known in closed form.
    pub fn reference_value(&self, problem: &ParabolicProblem) -> Option<f64> {
        self.reference.or(match (self.experiment, self.goal_kind()) {
            (_, GoalKind::L2Error) => Some(0.0),
            (Experiment::Config1, GoalKind::Average) => Some(config1_average(problem.t_end)),
            _ => None,
        })
    }

    /// The resolved configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("experiment", self.experiment.to_string());
        put("mode", self.mode.to_string());
        put("estimator", self.estimator.to_string());
        put("variant", self.variant.to_string());
        put("pu", self.pu.to_string());
        put("orders", self.orders.to_string());
        put("M_init", self.intervals().to_string());
        put("refinement", self.refinement.to_string());
        put("goal", self.goal_kind().to_string());
        put("theta_t", self.theta_t.to_string());
        put("theta_x", self.theta_x.to_string());
        put("c", self.c.to_string());
        put("loops", self.loops.to_string());
        put("quadrature", self.load_rule().name().to_string());
        if let Some(b) = self.dof_budget {
            put("dof_budget", b.to_string());
        }
        if let Some(r) = self.reference {
            put("reference", format!("{r:e}"));
        }
        put("output", self.output.display().to_string());
        put("vtk", self.vtk.to_string());
        put("timing", self.timing.to_string());
        put("workers", self.workers.to_string());
        s
    }
}

/// Shortest round-trip decimal.
pub fn fmt_float(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub const HISTORY_HEADER: &str =
    "loop,M,N_max,st_cells,st_dofs_primal,st_dofs_total,J_value,error,eta_k,eta_h,eta,I_eff,I_ind,wall_seconds";

pub fn history_line(r: &HistoryRow, timing: bool) -> String {
    let e = &r.report;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.loop_index,
        r.m,
        r.n_max,
        r.st_cells,
        r.st_dofs_primal,
        r.st_dofs_total,
        fmt_float(e.j_value),
        opt(e.error),
        fmt_float(e.eta_k),
        fmt_float(e.eta_h),
        fmt_float(e.eta),
        opt(e.i_eff),
        opt(e.i_ind),
        if timing { fmt_float(r.wall_seconds) } else { String::new() }
    )
}

pub const INDICATOR_HEADER: &str = "loop,m,t_m,eta_k,eta_h_sum,eta_joint_sum";

/// One line per slab, `m` counted from 1 and `t_m` the right end of `I_m`.
pub fn indicator_lines(s: &LoopState<'_>) -> Vec<String> {
    let field = &s.estimate.indicators;
    (0..field.len())
        .map(|m| {
            let p = field.part(m);
            format!(
                "{},{},{},{},{},{}",
                s.row.loop_index,
                m + 1,
                fmt_float(s.tmesh.interval(m).1),
                fmt_float(p.eta_k),
                fmt_float(p.eta_h_sum()),
                fmt_float(p.eta_kh_sum())
            )
        })
        .collect()
}

fn write_vtk(dir: &Path, s: &LoopState<'_>) -> std::io::Result<()> {
    let low = s.estimate.low_solution();
    let adj = &s.estimate.adjoint;
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let (mut v, mut g) = ([0.0; 2], [[0.0; 2]; 2]);
    for m in 0..s.slabs.len() {
        let mesh = &s.slabs.meshes[m];
        let eta = s.estimate.indicators.element_indicators(m);
        let mut u = Vec::with_capacity(4 * mesh.n_active());
        let mut z = Vec::with_capacity(4 * mesh.n_active());
        for cell in 0..mesh.n_active() {
            for r in corners {
                low.spaces[m].eval(&low.slabs[m], cell, r, &mut v, &mut g);
                u.push(v[0]);
                adj.spaces[m].eval(&adj.slabs[m], cell, r, &mut v, &mut g);
                z.push(v[0]);
            }
        }
        let path = dir.join(format!("loop{:02}_slab{:05}.vtk", s.row.loop_index, m + 1));
        let mut w = BufWriter::new(File::create(path)?);
        let title = format!("loop {} slab {} t = {}", s.row.loop_index, m + 1, s.tmesh.interval(m).1);
        mesh.write_vtk(&mut w, &title, &[("eta", &eta)], &[("u", &u), ("z", &z)])?;
        w.flush()?;
    }
    Ok(())
}

/// Outcome of [`run`].
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<HistoryRow>,
    pub wall_seconds: f64,
}

/// Execute a configuration and write its artifacts into `cfg.output`. Rows
/// are flushed as they are produced, so a failing run leaves partial files.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&cfg.output)?;
    let vtk_dir = cfg.output.join("vtk");
    if cfg.vtk {
        fs::create_dir_all(&vtk_dir)?;
    }
    let (problem, mesh) = cfg.experiment.setup(cfg.refinement);
    let goal = Goal::new(cfg.goal_kind(), &problem, &mesh);
    let m = cfg.intervals();
    let tmesh = TemporalMesh::uniform(problem.t_end, m);
    let slabs = SlabMeshes::uniform(mesh, m);
    let reference = cfg.reference_value(&problem);

    let mut history = BufWriter::new(File::create(cfg.output.join("history.csv"))?);
    writeln!(history, "{HISTORY_HEADER}")?;
    history.flush()?;
    let mut indicators = BufWriter::new(File::create(cfg.output.join("indicators.csv"))?);
    writeln!(indicators, "{INDICATOR_HEADER}")?;

    let mut io_error: Option<std::io::Error> = None;
    let body = || {
        adaptive_loop(
            &problem,
            &goal,
            tmesh,
            slabs,
            &cfg.estimator_config(),
            &cfg.solver_options(),
            &cfg.marking(),
            reference,
            |s| {
                if io_error.is_some() {
                    return;
                }
                let res = (|| -> std::io::Result<()> {
                    writeln!(history, "{}", history_line(s.row, cfg.timing))?;
                    history.flush()?;
                    for l in indicator_lines(s) {
                        writeln!(indicators, "{l}")?;
                    }
                    indicators.flush()?;
                    if cfg.vtk {
                        write_vtk(&vtk_dir, s)?;
                    }
                    Ok(())
                })();
                if let Err(e) = res {
                    io_error = Some(e);
                }
                log_row(s.row);
            },
        )
    };
    let result = if cfg.workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
            Ok(pool) => pool.install(body),
            Err(_) => body(),
        }
    } else {
        body()
    };
    let wall = start.elapsed().as_secs_f64();
    write_meta(cfg, wall, result.error.as_ref().map(|e| e.to_string()))?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(e) = result.error {
        return Err(e.into());
    }
    Ok(RunSummary { rows: result.rows, wall_seconds: wall })
}

fn log_row(r: &HistoryRow) {
    eprintln!(
        "loop {:>2}  M = {:>6}  N_max = {:>7}  J = {:.6e}  eta = {:.4e}  I_eff = {}",
        r.loop_index,
        r.m,
        r.n_max,
        r.report.j_value,
        r.report.eta,
        r.report.i_eff.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
    );
}

fn write_meta(cfg: &RunConfig, wall: f64, failure: Option<String>) -> std::io::Result<()> {
    let opts = cfg.solver_options();
    let est = cfg.estimator_config();
    let mut w = BufWriter::new(File::create(cfg.output.join("meta.txt"))?);
    write!(w, "{}", cfg.to_text())?;
    writeln!(w, "# derived settings, informational")?;
    writeln!(w, "# version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# load_quadrature = {} in time, {} Gauss points per direction in space", opts.load_rule.name(), opts.load_points)?;
    writeln!(w, "# estimator_f_quadrature = {}", est.f_rule.unwrap_or(opts.load_rule).name())?;
    writeln!(w, "# estimator_space_points = {}", est.n_space)?;
    writeln!(w, "# newton_abs_tol = {:e}", opts.newton.abs_tol)?;
    writeln!(w, "# newton_max_iter = {}", opts.newton.max_iter)?;
    writeln!(w, "# newton_rho_skip = {}", opts.newton.rho_skip)?;
    writeln!(w, "# newton_alpha_min = {}", opts.newton.alpha_min)?;
    writeln!(w, "# wall_seconds = {wall:.3}")?;
    match failure {
        Some(f) => writeln!(w, "# status = failed: {}", f.replace('\n', " "))?,
        None => writeln!(w, "# status = ok")?,
    }
    w.flush()
}

/// Text printed by `print-defaults`.
pub fn defaults_text() -> String {
    let mut s = String::new();
    for (k, d) in KEYS {
        s.push_str(&format!("# {k}: {d}\n"));
    }
    s.push('\n');
    s.push_str(&RunConfig::default().to_text());
    s
}

/// Text printed by `list-experiments`.
pub fn experiments_text() -> String {
    Experiment::ALL
        .iter()
        .map(|e| {
            let (_, mesh) = e.setup(0);
            format!(
                "{:<8} {} (N = {}, default M = {}, goal {})\n",
                e.name(),
                e.description(),
                mesh.n_active(),
                e.default_intervals(),
                e.default_goal()
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::from_text("# nothing\n\n").unwrap();
        assert_eq!(c.experiment, Experiment::Config1);
        assert_eq!(c.mode, Mode::Uniform);
        assert_eq!(c.estimator, EstimatorPart::Primal);
        assert_eq!(c.variant, Variant::Split);
        assert_eq!(c.pu, PuKind::Dg0);
        assert_eq!(c.orders, Orders::MIXED);
        assert_eq!(c.intervals(), 1000);
        assert_eq!(c.load_rule(), TimeRule::Midpoint);
    }

    #[test]
    fn rejections_name_the_key() {
        let e = RunConfig::from_text("pu = cg1\nexperiment = config3\ngoal = j1").unwrap_err();
        assert!(matches!(e, ConfigError::Forbidden(ref m) if m.contains("cg1")));
        let e = RunConfig::from_text("bogus = 1").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        let e = RunConfig::from_text("theta_x = 1.5").unwrap_err();
        assert!(e.to_string().contains("theta_x"));
        let e = RunConfig::from_text("orders = 2/1").unwrap_err();
        assert!(e.to_string().contains("orders"));
        assert!(RunConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn full_estimator_for_rod_goal_is_valid() {
        let c = RunConfig::from_text("estimator = full\norders = 1/1\nexperiment = config3\ngoal = j2").unwrap();
        assert_eq!(c.goal_kind(), GoalKind::RodSpecies);
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::from_text("loops = 3\nc = 2").unwrap();
        c.apply_flags(&["--loops=7", "--mode=adaptive"]).unwrap();
        assert_eq!((c.loops, c.mode, c.c), (7, Mode::Adaptive, 2.0));
        assert!(c.apply_flags(&["loops=7"]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_text("experiment = config2\nmode = adaptive\nreference = 0.125\ndof_budget = 9").unwrap();
        let d = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(d.to_text(), c.to_text());
        assert_eq!(d.intervals(), 100);
        assert_eq!(d.load_rule(), TimeRule::RightBox);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [1.68717e-2, 0.1 + 0.2, 1.0, -3.5e-300] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(0.5), "5e-1");
    }
}
