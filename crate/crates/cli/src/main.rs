//! `hybrid-limit` command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use hybrid_limit::analysis::{
    distances_strictly_decrease, entropy_curve, limit_sweep, min_section_invariant, poincare_section,
    write_section_csv, write_sweep_csv, SectionPoint, SectionResult, SweepConfig,
};
use hybrid_limit::config::{Mode, RunConfig};
use hybrid_limit::dynamics::{invariant_i, ClassicalFlow, SemiState, SemiclassicalFlow};
use hybrid_limit::initial::{build_classical_ic, build_semiclassical_ic, ICRequest};
use hybrid_limit::maxent::{means_from_multipliers, write_entropy_csv, MultiplierFlow, MultiplierState};
use hybrid_limit::output::sci;
use hybrid_limit::trajectory::{integrate, write_trajectory_csv, Trajectory};
use hybrid_limit::{validate, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const THREADS_VAR: &str = "HYBRID_LIMIT_THREADS";

#[derive(Parser)]
#[command(name = "hybrid-limit", version, about = "Semiclassical hybrid dynamics and classical-limit diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory per initial condition.
    Simulate(Common),
    /// Poincare section at A = crossing_value.
    Poincare(Common),
    /// Matched semiclassical/classical runs over a list of I.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Fail with exit code 4 unless distances strictly decrease.
        #[arg(long)]
        assert_monotone: bool,
    },
    /// Entropy and pseudo-temperature over a grid of I.
    EntropyCurve {
        #[command(flatten)]
        common: Common,
        /// Fail with exit code 4 unless S is increasing and concave.
        #[arg(long)]
        assert_monotone: bool,
    },
    /// Built-in property suite.
    Validate {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Integration(String),
    Config(String),
    Assertion(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Integration(_) => 2,
            Failure::Config(_) => 3,
            Failure::Assertion(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Integration(m) | Failure::Config(m) | Failure::Assertion(m) => m,
        }
    }
}

/// Errors before any integration starts.
fn setup(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

/// Errors raised while running.
fn running(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Parameter(_) => Failure::Config(e.to_string()),
        _ => Failure::Integration(e.to_string()),
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Integration(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

/// Output directory plus the provenance line shared by every file.
struct Sink {
    dir: PathBuf,
    header: String,
}

impl Sink {
    fn new(dir: &Path, command: &str, identity: &str) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let digest = Sha256::digest(identity.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(Self { dir: dir.to_path_buf(), header: format!("# hybrid-limit {VERSION} {command} {hash}") })
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Outcome {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.header).and_then(|_| body(&mut buf)).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))
    }

    /// Diagnostics as comment lines followed by the resolved config, so the
    /// summary itself can be passed back as `--config`.
    fn summary(&self, lines: &[(String, String)], cfg: &RunConfig, seed: u64, started: Instant) -> Outcome {
        let mut text = String::new();
        for (k, v) in lines {
            let _ = writeln!(text, "# {k} = {v}");
        }
        let _ = writeln!(text, "# seed = {seed}");
        let _ = writeln!(text, "# wall_time_s = {:.3}", started.elapsed().as_secs_f64());
        let _ = writeln!(text, "\n{}", cfg.to_text());
        self.write("summary.txt", |w| w.write_all(text.as_bytes()))
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.config.display())))?;
    RunConfig::parse(&text).map_err(setup)
}

fn open(common: &Common, command: &str) -> Result<(RunConfig, Sink), Failure> {
    let cfg = load(common)?;
    let identity = format!("{}seed = {}\n", cfg.to_text(), common.seed);
    let sink = Sink::new(&common.out, command, &identity)?;
    Ok((cfg, sink))
}

fn numbered(base: &str, k: usize, n: usize) -> String {
    if n == 1 {
        format!("{base}.csv")
    } else {
        format!("{base}_{k}.csv")
    }
}

/// Moment-space view of a multiplier trajectory.
fn multiplier_to_means(t: &Trajectory<MultiplierState>, hbar: f64) -> Result<Trajectory<SemiState>, Error> {
    let states = t.states.iter().map(|m| m.to_means(hbar)).collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory {
        times: t.times.clone(),
        invariant: states.iter().map(invariant_i).collect(),
        energy: t.energy.clone(),
        states,
        rates: Vec::new(),
        warning: t.warning,
        stats: t.stats,
    })
}

fn simulate(common: &Common) -> Outcome {
    let started = Instant::now();
    let (cfg, sink) = open(common, "simulate")?;
    let t_end = cfg.horizon().map_err(setup)?;
    let reqs = cfg.ic_requests().map_err(setup)?;
    let p = &cfg.params;
    let icfg = &cfg.integrator;
    let mut lines = Vec::new();
    let mut failure = None;
    for (k, req) in reqs.iter().enumerate() {
        let name = numbered("trajectory", k, reqs.len());
        let run = match cfg.task.mode {
            Mode::Means => {
                let s0 = build_semiclassical_ic(req, p).map_err(setup)?;
                integrate(&SemiclassicalFlow { params: p }, &s0, (0.0, t_end), icfg).map(|t| {
                    let drift = t.invariant_drift(0.25 * p.hbar * p.hbar);
                    (t, vec![("I_drift", drift)])
                })
            }
            Mode::Multipliers => {
                let s0 = build_semiclassical_ic(req, p).map_err(setup)?;
                let m0 = MultiplierState::from_means(&s0, p.hbar).map_err(setup)?;
                integrate(&MultiplierFlow { params: p }, &m0, (0.0, t_end), icfg).and_then(|t| {
                    let il = t.invariant_drift(0.0);
                    let means = multiplier_to_means(&t, p.hbar)?;
                    let drift = means.invariant_drift(0.25 * p.hbar * p.hbar);
                    Ok((means, vec![("I_lambda_drift", il), ("I_drift", drift)]))
                })
            }
            Mode::Classical => {
                let c0 = build_classical_ic(&ICRequest { i: 0.0, ..*req }, p).map_err(setup)?;
                integrate(&ClassicalFlow { params: p }, &c0, (0.0, t_end), icfg).map(|t| {
                    let worst = t.invariant.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    let t = Trajectory {
                        times: t.times,
                        states: t.states.iter().map(|s| s.cast()).collect(),
                        rates: Vec::new(),
                        invariant: t.invariant,
                        energy: t.energy,
                        warning: t.warning,
                        stats: t.stats,
                    };
                    (t, vec![("I_max_abs", worst)])
                })
            }
        };
        match run {
            Ok((traj, drifts)) => {
                sink.write(&name, |w| write_trajectory_csv(w, &traj))?;
                for (key, v) in drifts {
                    lines.push((format!("ic{k}.{key}"), sci(v)));
                }
                lines.push((format!("ic{k}.E_drift"), sci(traj.energy_drift())));
                lines.push((format!("ic{k}.samples"), traj.len().to_string()));
                if let Some(w) = traj.warning {
                    lines.push((format!("ic{k}.invariant_warning_t"), sci(w.t)));
                }
            }
            Err(e) => {
                lines.push((format!("ic{k}.failure"), e.to_string()));
                failure.get_or_insert(running(e));
            }
        }
    }
    sink.summary(&lines, &cfg, common.seed, started)?;
    failure.map_or(Ok(()), Err)
}

fn section_for(cfg: &RunConfig, req: &ICRequest, t_end: f64) -> Result<SectionResult, Failure> {
    let p = &cfg.params;
    let (scfg, icfg) = (&cfg.task.section, &cfg.integrator);
    match cfg.task.mode {
        Mode::Means => {
            let s0 = build_semiclassical_ic(req, p).map_err(setup)?;
            poincare_section(&SemiclassicalFlow { params: p }, &s0, scfg, icfg, t_end).map_err(running)
        }
        Mode::Classical => {
            let c0 = build_classical_ic(&ICRequest { i: 0.0, ..*req }, p).map_err(setup)?;
            poincare_section(&ClassicalFlow { params: p }, &c0, scfg, icfg, t_end).map_err(running)
        }
        Mode::Multipliers => {
            let s0 = build_semiclassical_ic(req, p).map_err(setup)?;
            let m0 = MultiplierState::from_means(&s0, p.hbar).map_err(setup)?;
            let mut r = poincare_section(&MultiplierFlow { params: p }, &m0, scfg, icfg, t_end).map_err(running)?;
            for q in &mut r.points {
                let m = MultiplierState { l1: q.xx, l2: q.pp, l3: q.l, a: 0.0, pa: 0.0 };
                let (xx, pp, l) = means_from_multipliers(&m, p.hbar).map_err(running)?;
                *q = SectionPoint { xx, pp, l, ..*q };
            }
            Ok(r)
        }
    }
}

fn poincare(common: &Common) -> Outcome {
    let started = Instant::now();
    let (cfg, sink) = open(common, "poincare")?;
    let t_end = cfg.horizon().map_err(setup)?;
    if !(t_end > cfg.task.section.transient_skip) {
        return Err(Failure::Config(format!(
            "T = {t_end} must exceed transient_skip = {}",
            cfg.task.section.transient_skip
        )));
    }
    let reqs = cfg.ic_requests().map_err(setup)?;
    let mut points = Vec::new();
    let mut lines = Vec::new();
    let mut failure = None;
    for (k, req) in reqs.iter().enumerate() {
        let r = section_for(&cfg, req, t_end)?;
        lines.push((format!("ic{k}.points"), r.points.len().to_string()));
        if let Some(e) = r.failure {
            lines.push((format!("ic{k}.failure"), e.to_string()));
            failure.get_or_insert(Failure::Integration(e.to_string()));
        }
        points.extend(r.points);
    }
    lines.push(("points".into(), points.len().to_string()));
    if !points.is_empty() {
        lines.push(("min_xx_pp_minus_L2_over_4".into(), sci(min_section_invariant(&points))));
    }
    sink.write("section.csv", |w| write_section_csv(w, &points))?;
    sink.summary(&lines, &cfg, common.seed, started)?;
    failure.map_or(Ok(()), Err)
}

fn sweep(common: &Common, assert_flag: bool) -> Outcome {
    let started = Instant::now();
    let (cfg, sink) = open(common, "sweep")?;
    let t_end = cfg.horizon().map_err(setup)?;
    let scfg = SweepConfig {
        i_values: cfg.i_values().map_err(setup)?,
        e: cfg.energy().map_err(setup)?,
        hbar: cfg.hbar(),
        horizon: t_end,
        metric_horizon: cfg.task.metric_horizon.unwrap_or(t_end),
    };
    let xx0 = cfg.single_xx0().map_err(setup)?;
    let rows = limit_sweep(&cfg.params, &scfg, xx0, &cfg.integrator).map_err(setup)?;
    sink.write("sweep.csv", |w| write_sweep_csv(w, &rows))?;
    let decreasing = distances_strictly_decrease(&rows);
    let mut lines = vec![("strictly_decreasing".to_string(), decreasing.to_string())];
    for (k, r) in rows.iter().enumerate() {
        if let Some(f) = &r.flag {
            lines.push((format!("row{k}.flag"), f.clone()));
        }
    }
    sink.summary(&lines, &cfg, common.seed, started)?;
    if (assert_flag || cfg.task.assert_monotone) && !decreasing {
        return Err(Failure::Assertion("classical distances do not strictly decrease".into()));
    }
    Ok(())
}

fn entropy(common: &Common, assert_flag: bool) -> Outcome {
    let started = Instant::now();
    let (cfg, sink) = open(common, "entropy-curve")?;
    let grid = cfg.i_values().map_err(setup)?;
    let floor = 0.25 * cfg.hbar() * cfg.hbar();
    if let Some(i) = grid.iter().find(|&&i| !(i > floor)) {
        return Err(Failure::Config(format!("I = {i:e} is not above hbar^2/4 = {floor:e}")));
    }
    let curve = entropy_curve(&grid, cfg.hbar()).map_err(setup)?;
    sink.write("entropy.csv", |w| write_entropy_csv(w, &curve.rows))?;
    let lines = vec![
        ("monotone".to_string(), curve.monotone.to_string()),
        ("concave".to_string(), curve.concave.to_string()),
        ("temperature_increasing".to_string(), curve.temperature_increasing.to_string()),
        ("temperature_bounded".to_string(), curve.temperature_bounded.to_string()),
    ];
    sink.summary(&lines, &cfg, common.seed, started)?;
    if (assert_flag || cfg.task.assert_monotone) && !(curve.monotone && curve.concave) {
        return Err(Failure::Assertion("entropy curve is not increasing and concave".into()));
    }
    Ok(())
}

fn validate_cmd(out: &Path, seed: u64) -> Outcome {
    let report = validate::run(seed);
    let sink = Sink::new(out, "validate", &format!("seed = {seed}\n"))?;
    let csv = report.to_csv();
    sink.write("validate.csv", |w| w.write_all(csv.as_bytes()))?;
    print!("{csv}");
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Assertion("validation suite reported failures".into()))
    }
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("{THREADS_VAR}: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Poincare(c) => poincare(c),
        Command::Sweep { common, assert_monotone } => sweep(common, *assert_monotone),
        Command::EntropyCurve { common, assert_monotone } => entropy(common, *assert_monotone),
        Command::Validate { out, seed } => validate_cmd(out, *seed),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
