//! Command-line front end: runs pipeline stages and writes plot-ready files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, StageFlags, DEMOS};
use crate::cycle::{is_asymptotically_stable, LimitCycle, StabilityReport};
use crate::error::{Error, Result};
use crate::frame::{build_frame, FrameKind, MovingFrame};
use crate::gmam::{default_kappa, lqa_ladder, minimize_lc, multistart_lqa, DiscretePath, Residuals};
use crate::hamiltonian::{default_radius, shoot_scan, Bounds, Extremal, ShootOptions, Termination};
use crate::io::{write_json, Table};
use crate::localqp::{LocalModel, Tube};
use crate::optimizer::Status;
use crate::pipeline::{builtin_cycle, Stages};
use crate::riccati::{
    check_conditions, conjugacy_defect, eigenvalue_periodicity_defect, plde_residual, prde_residual, reduced_coefficients, solve_prde,
    ConditionReport, PeriodicMatrixFunction, PrdeCoefficients,
};
use crate::systems::SystemSpec;
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "qpath", version, about = "Quasi-potential near stable limit cycles: cycles, frames, Riccati solutions, extremals and minimum action paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Path points of the minimum action solve.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Tube radius of the minimum action solve.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Proportionality constant of `h = kappa / N`.
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Cycle samples per period.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Cycle and Riccati tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed of randomized directions and multistart bends.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate the limit cycle and its Floquet multipliers.
    Cycle,
    /// Build the moving frame along the cycle.
    Frame,
    /// Solve the periodic Riccati equation for G.
    Riccati,
    /// Shoot extremals off the tube.
    Shoot,
    /// Quasi-potential samples along extremals and the tube surface.
    Map,
    /// Minimum action paths and their convergence in N.
    Study,
    /// Run the acceptance suite.
    Validate,
    /// Reproduce a named case.
    Demo {
        /// One of vdp-i, vdp-ii, vdp-iii, twolc, lv3d, net5d, hopf.
        name: String,
    },
}

/// Parses `argv` (program name first), runs it and returns the exit status:
/// 0 on success, 1 on numerical failure, 2 on usage errors.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var("QPATH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            return 2;
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if matches!(cli.command, Command::Validate) {
        return run_validate(&cfg.out);
    }
    let mut runner = Runner::new(&cfg);
    match runner.run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error in stage `{}`: {e}", runner.stage);
            let report = Failure {
                stage: runner.stage.to_string(),
                message: e.to_string(),
                detail: format!("{e:?}"),
            };
            if std::fs::create_dir_all(&cfg.out).is_ok() {
                let _ = write_json(&cfg.out.join("error.json"), "failure", &report);
            }
            1
        }
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

fn build_config(cli: &Cli) -> std::result::Result<RunConfig, CliError> {
    let mut cfg = match (&cli.command, &cli.flags.config) {
        (Command::Demo { name }, _) => RunConfig::demo(name)
            .ok_or_else(|| CliError::Usage(format!("unknown demo `{name}`; available: {}\nusage: qpath demo <name> [flags]", DEMOS.join(", "))))?,
        (_, Some(path)) => RunConfig::load(path).map_err(CliError::Run)?,
        _ => RunConfig::default(),
    };
    let only = |f: fn(&mut StageFlags)| {
        let mut s = StageFlags::default();
        f(&mut s);
        s
    };
    match cli.command {
        Command::Cycle => cfg.stages = only(|s| s.cycle = true),
        Command::Frame => cfg.stages = only(|s| s.frame = true),
        Command::Riccati => cfg.stages = only(|s| s.riccati = true),
        Command::Shoot => cfg.stages = only(|s| s.shoot = true),
        Command::Map => cfg.stages = only(|s| s.map = true),
        Command::Study => cfg.stages = only(|s| s.study = true),
        Command::Validate | Command::Demo { .. } => {}
    }
    let f = &cli.flags;
    if let Some(v) = &f.out {
        cfg.out = v.clone();
    }
    if let Some(v) = f.n {
        cfg.numeric.n = v;
    }
    if f.h.is_some() {
        cfg.numeric.h = f.h;
    }
    if f.kappa.is_some() {
        cfg.numeric.kappa = f.kappa;
    }
    if let Some(v) = f.samples {
        cfg.numeric.samples = v;
    }
    if f.tol.is_some() {
        cfg.numeric.tol = f.tol;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn run_validate(out: &Path) -> i32 {
    let outcomes = validate::run_all();
    print!("{}", validate::render(&outcomes));
    if std::fs::create_dir_all(out).is_ok() {
        let _ = write_json(&out.join("validate.json"), "validation", &outcomes);
    }
    if outcomes.iter().all(|o| o.passed) {
        0
    } else {
        1
    }
}

#[derive(Debug, Serialize)]
struct Failure {
    stage: String,
    message: String,
    detail: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CycleReport {
    system: String,
    period: f64,
    arclength: f64,
    samples: usize,
    newton_iterations: usize,
    residual: f64,
    multipliers: Vec<[f64; 2]>,
    stability: StabilityReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameReport {
    kind: FrameKind,
    flips: Vec<f64>,
    antiperiodic: usize,
    max_condition: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RiccatiReport {
    iterations: usize,
    doubled_period: bool,
    min_eigenvalue: f64,
    prde_residual: f64,
    plde_residual: f64,
    conjugacy_defect: f64,
    eigenvalue_periodicity_defect: f64,
    conditions: ConditionReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShotReport {
    tau: f64,
    direction: Vec<f64>,
    termination: Option<Termination>,
    error: Option<String>,
    max_abs_h: Option<f64>,
    final_action: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapReport {
    points: usize,
    tube: Tube,
    tube_points: usize,
    max_cross_section_aspect: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathSummary {
    n: usize,
    h: f64,
    action: f64,
    geometric: f64,
    quadratic: f64,
    tau: f64,
    z: Vec<f64>,
    converged: bool,
    status: Status,
    outer_iterations: usize,
    inner_iterations: usize,
    grad_norm: f64,
    residuals: Residuals,
}

impl From<&DiscretePath> for PathSummary {
    fn from(p: &DiscretePath) -> Self {
        Self {
            n: p.n(),
            h: p.h,
            action: p.total,
            geometric: p.geometric,
            quadratic: p.quadratic,
            tau: p.tau,
            z: p.z.clone(),
            converged: p.converged,
            status: p.status,
            outer_iterations: p.outer_iterations,
            inner_iterations: p.inner_iterations,
            grad_norm: p.grad_norm,
            residuals: p.residuals.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StudyResult {
    x_end: Vec<f64>,
    kappa: f64,
    action: f64,
    lqa: PathSummary,
    lc: Option<PathSummary>,
    multistart_totals: Option<Vec<Option<f64>>>,
    study_reference: f64,
    study_slope: f64,
}

/// Executes the configured stages with a content-addressed cache in `out/cache`.
struct Runner<'a> {
    cfg: &'a RunConfig,
    stage: &'static str,
    spec: Option<SystemSpec>,
    cycle: Option<LimitCycle>,
    frame: Option<MovingFrame>,
    riccati: Option<(PrdeCoefficients, PeriodicMatrixFunction)>,
    shots: Option<Vec<(f64, Vec<f64>, Result<Extremal>)>>,
}

fn hash_key(key: &impl Serialize) -> String {
    let text = serde_json::to_string(key).expect("cache key serializes");
    hex::encode(&Sha256::digest(text.as_bytes())[..12])
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            stage: "setup",
            spec: None,
            cycle: None,
            frame: None,
            riccati: None,
            shots: None,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn announce(&self, name: &str) {
        println!("wrote {}", self.out(name).display());
    }

    fn cached<T: Serialize + DeserializeOwned>(&self, kind: &str, key: &impl Serialize, compute: impl FnOnce() -> Result<T>) -> Result<T> {
        let dir = self.out("cache");
        let path = dir.join(format!("{kind}-{}.json", hash_key(key)));
        if let Ok(v) = crate::io::read_json::<T>(&path, kind) {
            return Ok(v);
        }
        let v = compute()?;
        std::fs::create_dir_all(&dir)?;
        write_json(&path, kind, &v)?;
        Ok(v)
    }

    fn cycle_key(&self) -> (crate::config::SystemConfig, crate::cycle::CycleOptions) {
        (self.cfg.system.clone(), self.cfg.cycle_options())
    }

    fn run(&mut self) -> Result<()> {
        std::fs::create_dir_all(&self.cfg.out)?;
        write_json(&self.out("config.json"), "config", self.cfg)?;
        self.spec = Some(self.cfg.system.build()?);
        let s = self.cfg.stages;
        let need_model = s.shoot || s.map || s.study;
        if s.cycle || s.frame || s.riccati || need_model {
            self.run_cycle(s.cycle)?;
        }
        if s.frame || s.riccati || need_model {
            self.run_frame(s.frame)?;
        }
        if s.riccati || need_model {
            self.run_riccati(s.riccati)?;
        }
        if s.shoot {
            self.run_shoot()?;
        }
        if s.map {
            self.run_map()?;
        }
        if s.study {
            self.run_study()?;
        }
        Ok(())
    }

    fn spec(&self) -> &SystemSpec {
        self.spec.as_ref().expect("system built")
    }

    fn run_cycle(&mut self, export: bool) -> Result<()> {
        self.stage = "cycle";
        let basin = self.cfg.system.basin_point()?;
        let opts = self.cfg.cycle_options();
        let cycle: LimitCycle = self.cached("cycle", &self.cycle_key(), || builtin_cycle(self.spec(), &basin, &opts))?;
        if export {
            let d = cycle.dim();
            let mut header = vec!["tau".to_string()];
            header.extend((0..d).map(|i| format!("x{i}")));
            header.extend((0..d).map(|i| format!("v{i}")));
            let mut t = Table::new(header);
            for k in 0..cycle.len() {
                let mut row = vec![cycle.phase(k)];
                row.extend_from_slice(cycle.sample(k));
                row.extend_from_slice(cycle.sample_velocity(k));
                t.push(row);
            }
            t.write(&self.out("cycle.csv"))?;
            self.announce("cycle.csv");
            let report = CycleReport {
                system: self.spec().name().to_string(),
                period: cycle.period(),
                arclength: cycle.arclength(),
                samples: cycle.len(),
                newton_iterations: cycle.newton_iterations(),
                residual: cycle.residual(),
                multipliers: cycle.multipliers().iter().map(|m| [m.re, m.im]).collect(),
                stability: is_asymptotically_stable(&cycle),
            };
            write_json(&self.out("cycle.json"), "cycle", &report)?;
            self.announce("cycle.json");
            println!("period {:.6}, arclength {:.6}", cycle.period(), cycle.arclength());
        }
        self.cycle = Some(cycle);
        Ok(())
    }

    fn run_frame(&mut self, export: bool) -> Result<()> {
        self.stage = "frame";
        let cycle = self.cycle.as_ref().expect("cycle stage ran");
        let frame: MovingFrame = self.cached("frame", &self.cycle_key(), || build_frame(self.spec(), cycle))?;
        if export {
            let d = frame.dim();
            let mut header = vec!["tau".to_string(), "speed".into(), "condition".into()];
            for j in 0..d {
                header.extend((0..d).map(|i| format!("e{j}_{i}")));
            }
            let mut t = Table::new(header);
            for k in 0..frame.samples_per_period() {
                let mut row = vec![frame.phase(k), frame.speed(k), frame.condition(k)];
                row.extend_from_slice(frame.grid_basis(k).as_slice());
                t.push(row);
            }
            t.write(&self.out("frame.csv"))?;
            self.announce("frame.csv");
            let report = FrameReport {
                kind: frame.kind(),
                flips: frame.flips().to_vec(),
                antiperiodic: frame.antiperiodic_count(),
                max_condition: frame.max_condition(),
                warnings: frame.warnings(),
            };
            write_json(&self.out("frame.json"), "frame", &report)?;
            self.announce("frame.json");
        }
        self.frame = Some(frame);
        Ok(())
    }

    fn run_riccati(&mut self, export: bool) -> Result<()> {
        self.stage = "riccati";
        let cycle = self.cycle.as_ref().expect("cycle stage ran");
        let frame = self.frame.as_ref().expect("frame stage ran");
        let key = (self.cycle_key(), self.cfg.prde_options());
        let prde = self.cfg.prde_options();
        let (coeffs, g): (PrdeCoefficients, PeriodicMatrixFunction) = self.cached("riccati", &key, || {
            let coeffs = reduced_coefficients(self.spec(), cycle, frame)?;
            let g = solve_prde(&coeffs, &prde)?;
            Ok((coeffs, g))
        })?;
        if export {
            let m = g.dim();
            let mut header = vec!["tau".to_string()];
            for j in 0..m {
                header.extend((0..m).map(|i| format!("G_{i}{j}")));
            }
            header.extend((0..m).map(|i| format!("eig{i}")));
            let mut t = Table::new(header);
            for k in 0..g.len() {
                let gk = g.sample(k);
                let mut row = vec![k as f64 * g.step()];
                row.extend_from_slice(gk.as_slice());
                row.extend(crate::linalg::sym_eigenvalues(&gk));
                t.push(row);
            }
            t.write(&self.out("G.csv"))?;
            self.announce("G.csv");
            let report = RiccatiReport {
                iterations: g.iterations(),
                doubled_period: g.is_doubled(),
                min_eigenvalue: g.min_eigenvalue(),
                prde_residual: prde_residual(&g, &coeffs)?,
                plde_residual: plde_residual(&g, &coeffs, 4)?,
                conjugacy_defect: conjugacy_defect(&g),
                eigenvalue_periodicity_defect: eigenvalue_periodicity_defect(&g),
                conditions: check_conditions(&coeffs, 0.0)?,
            };
            write_json(&self.out("riccati.json"), "riccati", &report)?;
            self.announce("riccati.json");
            println!("min eigenvalue of G {:.6}, fixed-point iterations {}", report.min_eigenvalue, report.iterations);
        }
        self.riccati = Some((coeffs, g));
        Ok(())
    }

    fn stages(&self) -> Stages {
        let (coeffs, g) = self.riccati.clone().expect("riccati stage ran");
        Stages {
            cycle: self.cycle.clone().expect("cycle stage ran"),
            frame: self.frame.clone().expect("frame stage ran"),
            coeffs,
            g,
        }
    }

    fn model(&self, tube: Tube) -> Result<LocalModel> {
        self.stages().model(tube)
    }

    fn shoot_radius(&self, model: &LocalModel) -> f64 {
        self.cfg.numeric.shoot_radius.unwrap_or_else(|| default_radius(model))
    }

    /// Scan seeds: both normal directions in the plane, seeded random unit
    /// directions in higher dimensions.
    fn seeds(&self, period: f64, m: usize) -> Vec<(f64, Vec<f64>)> {
        let k = self.cfg.numeric.shots.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut out = Vec::new();
        for i in 0..k {
            let tau = period * i as f64 / k as f64;
            if m == 1 {
                out.push((tau, vec![1.0]));
                out.push((tau, vec![-1.0]));
            } else {
                let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)).normalize();
                out.push((tau, v.as_slice().to_vec()));
            }
        }
        out
    }

    fn ensure_shots(&mut self) -> Result<()> {
        if self.shots.is_some() {
            return Ok(());
        }
        let model = self.model(Tube::Radius(1.0))?;
        let h = self.shoot_radius(&model);
        let cycle = model.cycle();
        let opts = ShootOptions {
            bounds: Some(Bounds::around((0..cycle.len()).map(|k| cycle.sample(k)), 0.5)),
            truncate_on_escape: true,
            record_every: 10,
            ..ShootOptions::default()
        };
        let seeds = self.seeds(cycle.period(), model.dim() - 1);
        let results = shoot_scan(self.spec(), &model, &seeds, h, self.cfg.numeric.t_max, &opts);
        self.shots = Some(seeds.into_iter().zip(results).map(|((t, d), r)| (t, d, r)).collect());
        Ok(())
    }

    fn run_shoot(&mut self) -> Result<()> {
        self.stage = "shoot";
        self.ensure_shots()?;
        let d = self.spec().dim();
        let mut header = vec!["shot".to_string(), "t".into()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("p{i}")));
        header.extend(["V".to_string(), "H".to_string()]);
        let mut t = Table::new(header);
        let mut reports = Vec::new();
        for (i, (tau, dir, res)) in self.shots.as_ref().unwrap().iter().enumerate() {
            match res {
                Ok(ext) => {
                    for k in 0..ext.len() {
                        let mut row = vec![i as f64, ext.t[k]];
                        row.extend_from_slice(&ext.phi[k]);
                        row.extend_from_slice(&ext.p[k]);
                        row.extend([ext.v[k], ext.h[k]]);
                        t.push(row);
                    }
                    reports.push(ShotReport {
                        tau: *tau,
                        direction: dir.clone(),
                        termination: Some(ext.termination),
                        error: None,
                        max_abs_h: Some(ext.max_abs_h),
                        final_action: Some(ext.final_action()),
                        steps: Some(ext.steps),
                    });
                }
                Err(e) => reports.push(ShotReport {
                    tau: *tau,
                    direction: dir.clone(),
                    termination: None,
                    error: Some(e.to_string()),
                    max_abs_h: None,
                    final_action: None,
                    steps: None,
                }),
            }
        }
        t.write(&self.out("extremals.csv"))?;
        self.announce("extremals.csv");
        write_json(&self.out("shoot.json"), "shoot", &reports)?;
        self.announce("shoot.json");
        let ok = reports.iter().filter(|r| r.error.is_none()).count();
        println!("{ok} of {} shots accepted", reports.len());
        Ok(())
    }

    fn run_map(&mut self) -> Result<()> {
        self.stage = "map";
        self.ensure_shots()?;
        let d = self.spec().dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.push("V".into());
        let mut t = Table::new(header);
        for (_, _, res) in self.shots.as_ref().unwrap() {
            if let Ok(ext) = res {
                for k in 0..ext.len() {
                    let mut row = ext.phi[k].clone();
                    row.push(ext.v[k]);
                    t.push(row);
                }
            }
        }
        t.write(&self.out("map.csv"))?;
        self.announce("map.csv");
        let probe = self.model(Tube::Radius(1.0))?;
        let tube = match self.cfg.numeric.tube_level {
            Some(delta) => Tube::Level(delta),
            None => Tube::Radius(self.shoot_radius(&probe)),
        };
        let model = probe.with_tube(tube);
        let surface = model.tube_surface(128, 32);
        let m = d - 1;
        let mut header = vec!["tau".to_string()];
        header.extend((0..m).map(|i| format!("z{i}")));
        header.extend((0..d).map(|i| format!("x{i}")));
        header.push("Q".into());
        let mut ts = Table::new(header);
        for p in &surface {
            let mut row = vec![p.tau];
            row.extend_from_slice(&p.z);
            row.extend_from_slice(&p.x);
            row.push(p.q);
            ts.push(row);
        }
        ts.write(&self.out("tube.csv"))?;
        self.announce("tube.csv");
        let report = MapReport {
            points: t.rows.len(),
            tube,
            tube_points: surface.len(),
            max_cross_section_aspect: model.max_cross_section_aspect(),
        };
        write_json(&self.out("map.json"), "map", &report)?;
        self.announce("map.json");
        Ok(())
    }

    fn run_study(&mut self) -> Result<()> {
        self.stage = "study";
        let x_end = self
            .cfg
            .numeric
            .x_end
            .clone()
            .ok_or_else(|| Error::InvalidArgument("the study stage needs numeric.x_end".into()))?;
        let model = self.model(Tube::Radius(1.0))?;
        let n = self.cfg.numeric.n;
        let kappa = match (self.cfg.numeric.h, self.cfg.numeric.kappa) {
            (Some(h), _) => h * n as f64,
            (None, Some(k)) => k,
            (None, None) => default_kappa(model.cycle()),
        };
        let mut ns: Vec<usize> = self.cfg.numeric.study_ns.iter().copied().filter(|&k| k <= n).collect();
        ns.push(n);
        ns.sort_unstable();
        ns.dedup();
        let opts = self.cfg.gmam_options();
        let spec = self.spec();
        let ladder = lqa_ladder(spec, &model, &x_end, &ns, kappa, &opts)?;
        let mut best = ladder.last().unwrap().clone();
        let mut multistart_totals = None;
        if self.cfg.numeric.multistart > 0 {
            let ms = multistart_lqa(spec, &model, &x_end, n, kappa / n as f64, self.cfg.numeric.multistart, self.cfg.seed, &opts)?;
            if ms.best.converged && ms.best.total < best.total {
                best = ms.best.clone();
            }
            multistart_totals = Some(ms.totals);
        }
        let lc = if self.cfg.numeric.compare_lc {
            Some(minimize_lc(spec, model.cycle(), &x_end, n, Some(&best.points), &opts)?)
        } else {
            None
        };

        let reference = ladder.last().unwrap().total;
        let mut st = Table::new(["N", "h", "action", "error"]);
        for p in &ladder {
            st.push(vec![p.n() as f64, p.h, p.total, (p.total - reference).abs()]);
        }
        st.write(&self.out("study.csv"))?;
        self.announce("study.csv");
        let slope = if ladder.len() > 2 {
            crate::gmam::fit_slope(&ladder[..ladder.len() - 1].iter().map(|p| (p.n() as f64, (p.total - reference).abs())).collect::<Vec<_>>())
        } else {
            f64::NAN
        };

        let d = spec.dim();
        let mut header = vec!["i".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        let mut pt = Table::new(header.clone());
        for (i, p) in best.points.iter().enumerate() {
            let mut row = vec![i as f64];
            row.extend_from_slice(p);
            pt.push(row);
        }
        pt.write(&self.out("path.csv"))?;
        self.announce("path.csv");
        if let Some(lc) = &lc {
            let mut lt = Table::new(header);
            for (i, p) in lc.points.iter().enumerate() {
                let mut row = vec![i as f64];
                row.extend_from_slice(p);
                lt.push(row);
            }
            lt.write(&self.out("path_lc.csv"))?;
            self.announce("path_lc.csv");
        }
        let result = StudyResult {
            x_end,
            kappa,
            action: best.total,
            lqa: PathSummary::from(&best),
            lc: lc.as_ref().map(PathSummary::from),
            multistart_totals,
            study_reference: reference,
            study_slope: slope,
        };
        write_json(&self.out("result.json"), "result", &result)?;
        self.announce("result.json");
        println!("action at N = {n}: {:.6} ({:?})", best.total, best.status);
        if !best.converged {
            return Err(Error::NoConvergence {
                iterations: best.inner_iterations,
                residual: best.grad_norm,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_inputs_exit_with_two() {
        assert_eq!(run_command(["qpath", "nosuch"]), 2);
        assert_eq!(run_command(["qpath", "demo", "nosuch"]), 2);
    }

    #[test]
    fn keys_differ_by_content() {
        assert_ne!(hash_key(&("a", 1)), hash_key(&("a", 2)));
        assert_eq!(hash_key(&("a", 1)), hash_key(&("a", 1)));
    }
}
