//! `qed`: parameter sweeps, single protocol runs and process tomography.
//!
//! Values are resolved as command-line flag, then config file, then built-in
//! default. Exit codes: 0 success, 1 numerical failure, 2 configuration
//! error, 3 infeasible un-collapsing strength, 4 I/O error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qed_core::config::RunConfigFile;
use qed_core::experiments::{
    fig2b_sweep, fig3a_sweep, fig4_pdn, figs1_sweep, format_g, free_decay_process, qed_process,
    write_csv_with_precision, Manifest, Metric, PhaseMode, RowStatus, SweepRow,
    INPUT_LABELS,
};
use qed_core::hilbert::QubitDensityMatrix;
use qed_core::protocol::{
    free_decay_baseline, run, Backend, Components, ProtocolConfig, Uncollapse,
};
use qed_core::tomography::{input_amplitudes, ProcessMatrix};
use qed_core::QedError;

#[derive(Parser)]
#[command(name = "qed", version, about = "Weak-measurement quantum error detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a sweep table as CSV plus a JSON run manifest.
    Sweep(SweepArgs),
    /// Run the protocol on one input state and print the result as JSON.
    Run(RunArgs),
    /// Reconstruct the process matrix and print the fidelities as JSON.
    Qpt(QptArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2b,
    Fig3a,
    Fig4,
    #[value(name = "figS1", alias = "figs1")]
    FigS1,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig4 => "fig4",
            Figure::FigS1 => "figS1",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Statevector,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Analytic => Backend::Analytic,
            BackendArg::Statevector => Backend::Statevector,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(name = "F")]
    F,
    Fav,
    Favp,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::F => Metric::F,
            MetricArg::Fav => Metric::Fav,
            MetricArg::Favp => Metric::Favp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    None,
    Model,
    Fit,
}

impl From<PhaseArg> for PhaseMode {
    fn from(m: PhaseArg) -> Self {
        match m {
            PhaseArg::None => PhaseMode::None,
            PhaseArg::Model => PhaseMode::Model,
            PhaseArg::Fit => PhaseMode::Fit,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    phase_mode: Option<PhaseArg>,
    /// Significant digits of emitted numbers.
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long)]
    k1: Option<f64>,
    /// Storage survival factor; derived from tau2 and the memory T1 when unset.
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k3: Option<f64>,
    #[arg(long)]
    kphi: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[command(flatten)]
    common: Common,
    /// CSV destination; standard output when neither this nor the config sets it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest destination; defaults to the CSV path with `.manifest.json` appended.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Shots per input and tomography setting, 0 for exact rows. A bare
    /// `--shots` uses the default experiment-like count.
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_SHOTS_STR)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    tau2: Option<Vec<f64>>,
    /// Keep rows with an infeasible un-collapsing strength instead of failing.
    #[arg(long)]
    allow_partial: bool,
}

const DEFAULT_SHOTS_STR: &str = "3000";

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: Option<f64>,
    /// Un-collapsing strength, a number or `auto`.
    #[arg(long)]
    pu: Option<String>,
    #[arg(long)]
    tau2: Option<f64>,
    /// Skip the storage step.
    #[arg(long)]
    no_storage: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// One of g, e, g+e, g-ie.
    #[arg(long, default_value = "g")]
    input: String,
    /// Run the free-decay baseline instead of the detection protocol.
    #[arg(long)]
    free_decay: bool,
}

#[derive(Args)]
struct QptArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    free_decay: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self {
            code: 4,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<QedError> for Failure {
    fn from(e: QedError) -> Self {
        let code = match e {
            QedError::InfeasibleUncollapse(_) => 3,
            QedError::Config(_)
            | QedError::OutOfRange { .. }
            | QedError::InvalidParameter { .. }
            | QedError::SingularReadout => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Run(a) => cmd_run(a),
        Command::Qpt(a) => cmd_qpt(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qed: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfigFile> {
    let mut cfg = match &common.config {
        Some(path) => RunConfigFile::load(path).map_err(|e| Failure::config(e.to_string()))?,
        None => RunConfigFile::default(),
    };
    if let Some(b) = common.backend {
        cfg.protocol.backend = b.into();
    }
    if let Some(m) = common.phase_mode {
        cfg.protocol.phase_mode = m.into();
    }
    if let Some(d) = common.precision {
        cfg.output.precision = d;
    }
    let k = &mut cfg.protocol.kappas;
    k.k1 = common.k1.unwrap_or(k.k1);
    k.k2 = common.k2.or(k.k2);
    k.k3 = common.k3.unwrap_or(k.k3);
    k.kphi = common.kphi.unwrap_or(k.kphi);
    Ok(cfg)
}

/// The effective configuration must pass the same checks as a loaded file.
fn validated(cfg: RunConfigFile) -> CliResult<RunConfigFile> {
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(m) = a.metric {
        cfg.sweep.metric = m.into();
    }
    if let Some(s) = a.shots {
        cfg.monte_carlo.shots = s;
    }
    if let Some(s) = a.seed {
        cfg.monte_carlo.seed = s;
    }
    if let Some(g) = a.p_grid {
        cfg.sweep.p_grid = g;
    }
    if let Some(t) = a.tau2 {
        cfg.sweep.tau2_us = t;
    }
    if a.out.is_some() {
        cfg.output.csv = a.out;
    }
    if a.manifest.is_some() {
        cfg.output.manifest = a.manifest;
    }
    let cfg = validated(cfg)?;

    let spec = cfg.sweep_spec();
    let rows = match a.figure {
        Figure::Fig2b => fig2b_sweep(&spec),
        Figure::Fig3a => fig3a_sweep(&spec),
        Figure::Fig4 => fig4_pdn(&spec),
        Figure::FigS1 => figs1_sweep(&spec),
    }?;
    check_rows(&rows, a.allow_partial)?;

    let digits = cfg.output.precision;
    match &cfg.output.csv {
        Some(path) => {
            write_file(path, |w| write_csv_with_precision(&rows, w, digits))?;
            let manifest_path = cfg.output.manifest.clone().unwrap_or_else(|| {
                let mut s = path.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            });
            write_manifest(&manifest_path, a.figure, &cfg)?;
        }
        None => {
            let stdout = io::stdout();
            write_csv_with_precision(&rows, stdout.lock(), digits)
                .map_err(|e| Failure::io(Path::new("<stdout>"), io::Error::other(e.to_string())))?;
            if let Some(path) = &cfg.output.manifest {
                write_manifest(path, a.figure, &cfg)?;
            }
        }
    }
    Ok(())
}

fn check_rows(rows: &[SweepRow], allow_partial: bool) -> CliResult<()> {
    let infeasible: Vec<String> = rows
        .iter()
        .filter(|r| r.status == RowStatus::InfeasibleUncollapse)
        .map(|r| format!("p={} tau2={}", r.p.unwrap_or(f64::NAN), r.tau2_us))
        .collect();
    for r in rows.iter().filter(|r| r.status == RowStatus::NoSelection) {
        eprintln!(
            "qed: warning: no selected runs at p={} tau2={}",
            r.p.unwrap_or(f64::NAN),
            r.tau2_us
        );
    }
    if infeasible.is_empty() {
        return Ok(());
    }
    if allow_partial {
        eprintln!("qed: warning: infeasible un-collapsing at {}", infeasible.join(", "));
        return Ok(());
    }
    Err(Failure {
        code: 3,
        message: format!(
            "no valid un-collapsing strength at {} (use --allow-partial to keep these rows)",
            infeasible.join(", ")
        ),
    })
}

fn write_file<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> qed_core::Result<()>,
{
    let file = File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| Failure::io(path, io::Error::other(e.to_string())))?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn write_manifest(path: &Path, figure: Figure, cfg: &RunConfigFile) -> CliResult<()> {
    let manifest = Manifest::new(
        &format!("sweep {}", figure.name()),
        cfg,
        cfg.protocol.backend,
        cfg.monte_carlo.shots,
        cfg.monte_carlo.seed,
    )?;
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::config(format!("manifest: {e}")))?;
    write_file(path, |w| {
        writeln!(w, "{text}").map_err(|e| QedError::Config(e.to_string()))
    })
}

fn protocol_config(a: &ProtocolArgs) -> CliResult<(RunConfigFile, ProtocolConfig)> {
    let mut cfg = load_config(&a.common)?;
    let s = &mut cfg.protocol;
    if let Some(p) = a.p {
        s.p = p;
    }
    if let Some(t) = a.tau2 {
        s.tau2_us = t;
    }
    if a.no_storage {
        s.storage_enabled = false;
    }
    if let Some(pu) = &a.pu {
        s.p_u = parse_pu(pu)?;
    }
    let cfg = validated(cfg)?;
    let pc = cfg.protocol_config();
    Ok((cfg, pc))
}

fn parse_pu(s: &str) -> CliResult<Uncollapse> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Uncollapse::Auto);
    }
    s.parse()
        .map(Uncollapse::Fixed)
        .map_err(|_| Failure::config(format!("--pu expects a number or `auto`, got `{s}`")))
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let (cfg, base) = protocol_config(&a.protocol)?;
    let index = INPUT_LABELS
        .iter()
        .position(|l| *l == a.input)
        .ok_or_else(|| Failure::config(format!("unknown input `{}`; expected one of {INPUT_LABELS:?}", a.input)))?;
    let (alpha, beta) = input_amplitudes()[index];
    let config = base.with_input(alpha, beta);
    let backend = cfg.protocol.backend;
    let result = if a.free_decay {
        free_decay_baseline(&config, backend)?
    } else {
        run(&config, backend)?
    };
    let n = Num(cfg.output.precision);

    let components = match &result.components {
        Components::Analytic {
            no_jump,
            final_g,
            final_e,
        } => json!({
            "no_jump": n.v(*no_jump),
            "final_g": n.v(*final_g),
            "final_e": n.v(*final_e),
        }),
        Components::Branches(branches) => Value::Array(
            branches
                .iter()
                .map(|b| json!({"events": b.events, "weight": n.v(b.weight)}))
                .collect(),
        ),
    };
    let normalized = result.normalized().ok();
    let out = json!({
        "pipeline": if a.free_decay { "free_decay" } else { "qed" },
        "backend": backend,
        "input": a.input,
        "p": n.v(config.p),
        "p_u": n.v(result.p_u),
        "tau2_us": n.v(config.tau2_us),
        "P_DN": n.v(result.p_dn),
        "no_jump_probability": n.v(result.no_jump_probability()),
        "jump_probability": n.v(result.jump_probability()),
        "components": components,
        "net_phase": n.v(result.net_phase),
        "rho": normalized.as_ref().map(|r| n.qubit(r)),
        "rho_unnormalized": n.qubit(&result.rho),
    });
    print_json(&out)
}

fn cmd_qpt(a: QptArgs) -> CliResult<()> {
    let (cfg, config) = protocol_config(&a.protocol)?;
    let backend = cfg.protocol.backend;
    let mode = cfg.protocol.phase_mode;
    let (chi, report) = if a.free_decay {
        free_decay_process(&config, backend, mode)?
    } else {
        qed_process(&config, backend, mode)?
    };
    let n = Num(cfg.output.precision);
    let p_u = if a.free_decay {
        None
    } else {
        Some(config.resolved_pu()?)
    };
    let out = json!({
        "pipeline": if a.free_decay { "free_decay" } else { "qed" },
        "backend": backend,
        "p": n.v(config.p),
        "p_u": p_u.map(|x| n.v(x)),
        "tau2_us": n.v(config.tau2_us),
        "basis": ["I", "X", "Y", "Z"],
        "chi_normalized": n.chi(&chi.normalized()?),
        "min_eigenvalue": n.v(chi.normalized()?.min_eigenvalue()),
        "F": n.v(report.f),
        "F_av": n.v(report.f_av),
        "F_av_prime": n.v(report.f_av_prime),
        "F_av_sc": n.v(report.f_av_sc),
        "F_av_prime_sc": n.v(report.f_av_prime_sc),
        "trace_chi": n.v(report.trace),
    });
    print_json(&out)
}

fn print_json(v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::config(e.to_string()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

/// Rounds numbers to a fixed count of significant digits before they reach JSON.
#[derive(Clone, Copy)]
struct Num(usize);

impl Num {
    fn v(self, x: f64) -> Value {
        // below this everything is floating-point residue of exact zeros
        let x = if x.abs() < 1e-15 { 0.0 } else { x };
        let rounded: f64 = format_g(x, self.0).parse().unwrap_or(x);
        serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
    }

    fn complex_grid<F>(self, n: usize, get: F) -> Value
    where
        F: Fn(usize, usize) -> qed_core::C64,
    {
        let part = |f: &dyn Fn(qed_core::C64) -> f64| -> Value {
            Value::Array(
                (0..n)
                    .map(|i| Value::Array((0..n).map(|j| self.v(f(get(i, j)))).collect()))
                    .collect(),
            )
        };
        let mut m = Map::new();
        m.insert("re".into(), part(&|z| z.re));
        m.insert("im".into(), part(&|z| z.im));
        Value::Object(m)
    }

    fn qubit(self, rho: &QubitDensityMatrix) -> Value {
        self.complex_grid(2, |i, j| rho.get(i, j))
    }

    fn chi(self, chi: &ProcessMatrix) -> Value {
        self.complex_grid(4, |i, j| chi.get(i, j))
    }
}
