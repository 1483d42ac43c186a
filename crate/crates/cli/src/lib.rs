//! Scenario runner for the `gaussdecay` binary.
//!
//! Exit codes: 0 when every scenario passes, 1 when any check fails, 2 for
//! usage, configuration and guard errors (raised before any compute).

// NaN must fail the parameter checks, hence `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod config;
pub mod registry;
pub mod tasks;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use config::{Config, Probes, Scenario, Task};
use tasks::{Outcome, Prepared, Table};

#[derive(Parser, Debug)]
#[command(name = "gaussdecay", version, about = "Gaussian-decay scenarios for magnetic Schrödinger evolutions")]
pub struct Cli {
    /// Scenario file (TOML with `[[scenario]]` entries).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV/JSON reports and snapshots.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Scenarios run concurrently (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every scenario of `--config`.
    Run,
    /// Closed-form residuals, endpoint rates and the α̃ report.
    VerifyClosedForm(ClosedFormArgs),
    /// Propagate data and record probes.
    Simulate(SimulateArgs),
    /// Apply a transform chain to a field and check the round trip.
    Transform(TransformArgs),
    /// Crönström gauge reduction report.
    Gauge(GaugeArgs),
    /// Oscillator or Landau eigenpairs with residuals.
    Eigen(EigenArgs),
    /// Classify (α, β) against a decay threshold.
    Thresholds(ThresholdArgs),
    /// Fit the Gaussian decay rate of a field.
    DecayFit(DecayFitArgs),
    /// Free Gaussian evolution against the αβ = 4T threshold.
    HardyFree(HardyArgs),
}

#[derive(Args, Debug)]
pub struct ClosedFormArgs {
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Uniform field strength; selects the two-dimensional magnetic family.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value = "plus")]
    pub branch: String,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "harmonic{omega=1}")]
    pub equation: String,
    #[arg(long, default_value = "gaussian")]
    pub data: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Field reference, e.g. `file{path=u.bin}`.
    #[arg(long, default_value = "gaussian")]
    pub data: String,
    /// Transform reference; repeat to build a chain.
    #[arg(long = "transform", required = true)]
    pub transforms: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub horizon: f64,
}

#[derive(Args, Debug)]
pub struct GaugeArgs {
    #[arg(long, default_value = "gradient")]
    pub potential: String,
}

#[derive(Args, Debug)]
pub struct EigenArgs {
    #[arg(long, conflicts_with = "b")]
    pub omega: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub max_m: usize,
    #[arg(long, default_value_t = 2)]
    pub l_max: i64,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    #[arg(long, default_value = "free")]
    pub kind: String,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long = "T")]
    pub t: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Args, Debug)]
pub struct DecayFitArgs {
    /// Field reference, e.g. `file{path=u.bin}`.
    #[arg(long)]
    pub data: String,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub window: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_sq: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct HardyArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
    pub times: Vec<f64>,
}

fn pair(v: &Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.as_ref().map(|w| (w[0], w[1]))
}

fn scenario(name: &str, task: Task) -> Scenario {
    Scenario {
        name: name.into(),
        task,
        equation: None,
        data: None,
        transforms: Vec::new(),
        grid: None,
        probes: Probes::default(),
        checks: Default::default(),
        outputs: Default::default(),
    }
}

impl Command {
    fn task(&self) -> Option<Task> {
        Some(match self {
            Command::Run => return None,
            Command::VerifyClosedForm(_) => Task::VerifyClosedForm,
            Command::Simulate(_) => Task::Simulate,
            Command::Transform(_) => Task::Transform,
            Command::Gauge(_) => Task::Gauge,
            Command::Eigen(_) => Task::Eigen,
            Command::Thresholds(_) => Task::Thresholds,
            Command::DecayFit(_) => Task::DecayFit,
            Command::HardyFree(_) => Task::HardyFree,
        })
    }

    /// A one-scenario config built from flags.
    fn to_config(&self) -> Result<Config> {
        let task = self.task().context("`run` needs --config")?;
        let mut s = scenario(task.name(), task);
        match self {
            Command::Run => unreachable!(),
            Command::VerifyClosedForm(a) => {
                s.data = Some(match a.b {
                    Some(b) => format!("closed_form{{b={b}, k={}, branch={}}}", a.k, a.branch),
                    None => format!("closed_form{{omega={}, n={}, k={}, branch={}}}", a.omega, a.n, a.k, a.branch),
                });
                if a.b.is_some() {
                    s.equation = Some("magnetic".into());
                }
                s.probes.count = a.count;
            }
            Command::Simulate(a) => {
                s.equation = Some(a.equation.clone());
                s.data = Some(a.data.clone());
                s.probes.times = a.times.clone();
                s.probes.dt = a.dt;
            }
            Command::Transform(a) => {
                s.data = Some(a.data.clone());
                s.transforms = a.transforms.clone();
                s.probes.horizon = Some(a.horizon);
            }
            Command::Gauge(a) => s.equation = Some(a.potential.clone()),
            Command::Eigen(a) => {
                s.equation = Some(match (a.omega, a.b) {
                    (_, Some(b)) => format!("magnetic{{b={b}}}"),
                    (w, None) => format!("harmonic{{omega={}}}", w.unwrap_or(1.0)),
                });
                s.probes.max_m = a.max_m;
                s.probes.l_max = a.l_max;
            }
            Command::Thresholds(a) => {
                let p = match a.kind.as_str() {
                    "harmonic" => format!(", omega={}", a.omega.context("--kind harmonic needs --omega")?),
                    "repulsive" => format!(", nu={}", a.nu.context("--kind repulsive needs --nu")?),
                    "magnetic" => format!(", b={}", a.b.context("--kind magnetic needs --b")?),
                    _ => String::new(),
                };
                s.probes.thresholds = vec![format!("{}{{T={}, alpha={}, beta={}{p}}}", a.kind, a.t, a.alpha, a.beta)];
            }
            Command::DecayFit(a) => {
                s.data = Some(a.data.clone());
                s.probes.fit_window = pair(&a.window);
                s.probes.alpha_sq = a.alpha_sq.clone();
            }
            Command::HardyFree(a) => s.probes.times = a.times.clone(),
        }
        Ok(Config { seed: 0, scenarios: vec![s] })
    }
}

fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_reports(dir: &Path, outcomes: &[Outcome], scenarios: &[Scenario], seed: u64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (o, s) in outcomes.iter().zip(scenarios) {
        if s.outputs.csv {
            write_table(&dir.join(format!("{}.csv", o.name)), &o.table)?;
        }
        if s.outputs.json {
            fs::write(dir.join(format!("{}.json", o.name)), serde_json::to_string_pretty(&o.summary)? + "\n")?;
        }
        for (stem, f) in &o.snapshots {
            f.save(&dir.join(format!("{stem}.bin")))?;
        }
    }
    let summary = serde_json::json!({
        "seed": seed,
        "passed": outcomes.iter().filter(|o| o.pass).count(),
        "failed": outcomes.iter().filter(|o| !o.pass).count(),
        "scenarios": outcomes.iter().map(|o| serde_json::json!({
            "name": o.name, "task": o.task.name(), "pass": o.pass, "detail": o.detail,
        })).collect::<Vec<_>>(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

fn print_table(table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse, prepare, execute and report. `Err` means a configuration error.
fn run(cli: &Cli) -> Result<bool> {
    let (cfg, from_flags) = match &cli.config {
        Some(p) => {
            let mut cfg = Config::load(p)?;
            if let Some(task) = cli.command.task() {
                cfg.scenarios.retain(|s| s.task == task);
                anyhow::ensure!(!cfg.scenarios.is_empty(), "{} has no `{}` scenarios", p.display(), task.name());
            }
            (cfg, false)
        }
        None => (cli.command.to_config()?, true),
    };
    let prepared: Vec<Prepared> = cfg
        .scenarios
        .iter()
        .map(|s| tasks::prepare(s).with_context(|| format!("scenario `{}`", s.name)))
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build()?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        prepared
            .par_iter()
            .map(|p| {
                log::info!("running `{}` ({})", p.scenario.name, p.scenario.task.name());
                let o = tasks::execute(p, cfg.seed);
                log::info!("`{}`: {}", o.name, o.detail);
                o
            })
            .collect()
    });

    let out_dir = match (&cli.out_dir, from_flags) {
        (Some(d), _) => Some(d.clone()),
        (None, false) => Some(PathBuf::from("out")),
        (None, true) => None,
    };
    if let Some(dir) = &out_dir {
        write_reports(dir, &outcomes, &cfg.scenarios, cfg.seed)?;
    }
    if from_flags {
        print_table(&outcomes[0].table)?;
    }
    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        writeln!(err, "{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail)?;
    }
    Ok(outcomes.iter().all(|o| o.pass))
}

/// Entry point of the binary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
