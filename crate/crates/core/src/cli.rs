//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration or I/O error,
//! 3 numeric failure.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{bifurcation_sweep, lyapunov_estimate, mismatch_sensitivity, recovery_metrics, ConverterSetup};
use crate::config::{load_config, parse_config, RunConfig};
use crate::csv_io::{format_f64, write_table_csv, write_waveform_csv};
use crate::dynamics::ConverterKind;
use crate::error::{Error, Result};
use crate::link::run_link;
use crate::sim::{steps_for, Converter};
use crate::waveform::Waveform;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chaosmask", version, about = "Chaos-masked transmission with buck and boost converters")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Configuration file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override one setting, e.g. `--set buck.v_in=40` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Simulated duration in seconds (overrides link.duration)
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Channel noise seed (overrides channel.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one converter and write its state trajectories
    Simulate {
        #[arg(value_parser = ["buck", "boost"])]
        converter: String,
    },
    /// Bifurcation sweep of the configured parameter
    Bifurcate,
    /// Largest Lyapunov exponent of the configured converter
    Lyapunov,
    /// Run the masking link and write its waveforms
    Link,
    /// Recovery quality versus receiver parameter mismatch
    Sensitivity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Bifurcate => "bifurcate",
            Command::Lyapunov => "lyapunov",
            Command::Link => "link",
            Command::Sensitivity => "sensitivity",
        }
    }
}

/// Process exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigParse { .. } | Error::ConfigValue { .. } | Error::InvalidParameter { .. } | Error::Io(_) | Error::Csv { .. } => {
            EXIT_CONFIG
        }
        Error::Domain(_) | Error::NoEvent { .. } | Error::EventTolerance { .. } | Error::NumericBlowUp { .. } => EXIT_NUMERIC,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut overrides = g.overrides.clone();
    if let Some(d) = g.duration {
        overrides.push(format!("link.duration={d:?}"));
    }
    if let Some(s) = g.seed {
        overrides.push(format!("channel.seed={s}"));
    }
    match &g.config {
        Some(path) => load_config(path, &overrides),
        None => parse_config("", &overrides),
    }
}

fn converter_setup(cfg: &RunConfig) -> ConverterSetup {
    ConverterSetup {
        buck: cfg.link.buck,
        ramp: cfg.link.ramp,
        boost: cfg.link.boost,
        buck_initial: cfg.link.tx_initial.buck,
        boost_initial: cfg.link.tx_initial.boost,
        integrator: None,
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve_config(&cli.global)?;
    fs::create_dir_all(&cli.global.out).map_err(|e| Error::Io(format!("{}: {e}", cli.global.out.display())))?;
    let mut out = Outputs {
        dir: cli.global.out.clone(),
        files: Vec::new(),
    };
    match &cli.command {
        Command::Simulate { converter } => simulate(&cfg, converter.parse()?, &mut out)?,
        Command::Bifurcate => bifurcate(&cfg, &mut out)?,
        Command::Lyapunov => lyapunov(&cfg, &mut out)?,
        Command::Link => link(&cfg, &mut out)?,
        Command::Sensitivity => sensitivity(&cfg, &mut out)?,
    }
    let manifest = manifest_text(&cfg, cli.command.name(), &out.files, started.elapsed().as_secs_f64());
    fs::write(out.dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Reproducibility record: resolved settings, version, seed, outputs, wall time.
pub fn manifest_text(cfg: &RunConfig, command: &str, files: &[String], wall_clock_s: f64) -> String {
    let mut s = String::new();
    s.push_str(&format!("tool = chaosmask {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("command = {command}\n"));
    s.push_str(&format!("channel_seed = {}\n", cfg.channel.seed));
    s.push_str(&format!("outputs = {}\n", files.join(", ")));
    s.push_str(&format!("wall_clock_s = {wall_clock_s:.3}\n"));
    s.push_str("[config]\n");
    for (key, value) in cfg.entries() {
        s.push_str(&format!("{key} = {value}\n"));
    }
    s
}

fn simulate(cfg: &RunConfig, kind: ConverterKind, out: &mut Outputs) -> Result<()> {
    let setup = converter_setup(cfg);
    let (names, traj) = match kind {
        ConverterKind::Buck => (["buck_i.csv", "buck_v_io.csv"], sample_states(setup.buck_sim()?, cfg)?),
        ConverterKind::Boost => (["boost_i.csv", "boost_v_c.csv"], sample_states(setup.boost_sim()?, cfg)?),
    };
    for (k, name) in names.iter().enumerate() {
        let wf = Waveform::new(0.0, cfg.link.sample_step, traj.iter().map(|x| x[k]).collect())?;
        write_waveform_csv(&wf, &out.path(name))?;
    }
    println!("{} samples of {kind:?} written to {}", traj.len(), out.dir.display());
    Ok(())
}

/// States every `link.sample_step` over `link.duration`, starting with the initial state.
fn sample_states<C: Converter>(mut sim: C, cfg: &RunConfig) -> Result<Vec<[f64; 2]>> {
    let h = sim.step_size();
    let every = steps_for(cfg.link.sample_step, h).max(1);
    let total = steps_for(cfg.link.duration, h);
    let mut states = vec![sim.state_vec()];
    for k in 1..=total {
        sim.step()?;
        if k % every == 0 {
            states.push(sim.state_vec());
        }
    }
    Ok(states)
}

fn bifurcate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = &cfg.sweep;
    let data = bifurcation_sweep(&converter_setup(cfg), s.parameter, s.lo, s.hi, s.points, &s.settings())?;
    let mut rows = Vec::new();
    for p in &data.points {
        match &p.failure {
            Some(msg) => eprintln!("warning: {} = {} failed: {msg}", data.parameter, p.value),
            None => rows.extend(p.samples.iter().map(|v| vec![p.value, *v])),
        }
    }
    write_table_csv(&out.path("bifurcation.csv"), &["parameter", "sample"], &rows)?;
    println!("{} points of {} swept", data.points.len(), data.parameter);
    Ok(())
}

fn lyapunov(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let setup = converter_setup(cfg);
    let l = &cfg.lyapunov;
    let exponent = match l.system {
        ConverterKind::Buck => lyapunov_estimate(setup.buck_sim()?, &l.settings(setup.ramp.period()))?,
        ConverterKind::Boost => lyapunov_estimate(setup.boost_sim()?, &l.settings(setup.boost.t_clk))?,
    };
    fs::write(
        out.path("lyapunov.csv"),
        format!("epsilon0,exponent\n{},{}\n", format_f64(l.epsilon0), format_f64(exponent)),
    )?;
    println!("largest Lyapunov exponent ({:?}): {exponent:.6e} 1/s", l.system);
    Ok(())
}

fn link(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let result = run_link(&cfg.link, &cfg.message.source(), &cfg.channel.model(), None)?;
    for (name, wf) in [
        ("composite.csv", &result.composite),
        ("recovered.csv", &result.recovered),
        ("message.csv", &result.message),
        ("sync_error.csv", &result.sync_error),
    ] {
        write_waveform_csv(wf, &out.path(name))?;
    }
    let m = recovery_metrics(&result.message, &result.recovered, cfg.link.transient_cut)?;
    println!(
        "rmse {:.6e} V, relative rmse {:.6e}, correlation {:.6}, snr {:.2} dB",
        m.rmse, m.relative_rmse, m.correlation, m.snr_db
    );
    if result.negative_current_steps != (0, 0) {
        eprintln!(
            "warning: negative inductor current on {:?} steps (tx, rx)",
            result.negative_current_steps
        );
    }
    Ok(())
}

fn sensitivity(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = &cfg.sensitivity;
    let results = mismatch_sensitivity(&cfg.link, &cfg.message.source(), &cfg.channel.model(), s.parameter, &s.deltas)?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|(d, m)| vec![*d, m.rmse, m.relative_rmse, m.correlation, m.snr_db])
        .collect();
    write_table_csv(
        &out.path("sensitivity.csv"),
        &["delta", "rmse", "relative_rmse", "correlation", "snr_db"],
        &rows,
    )?;
    for (d, m) in &results {
        println!("{} {d:+.4}: relative rmse {:.6e}", s.parameter, m.relative_rmse);
    }
    Ok(())
}
