//! `fracsde` command line: runs the Monte Carlo experiments, computes `c_H`
//! and dumps fBm sample paths.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use fracsde::constants::c_h;
use fracsde::fbm::FbmSampler;
use fracsde::harness::{build_id, persist, run, ExperimentConfig, Report, Summary, CONFIG_KEYS, SCHEMA_VERSION};
use fracsde::{HurstParam, TimeGrid};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

const EXIT_CHECK: u8 = 2;
const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 64;
const EXIT_INVALID: u8 = 65;

#[derive(Parser)]
#[command(name = "fracsde", version = build_id(), about = "Euler schemes and compensated sums driven by rough fBm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one fBm path and write it as a binary dump
    SampleFbm(SampleArgs),
    /// Compute the constant c_H and print it as JSON
    ComputeCh(ChArgs),
    /// Strong rate of the Euler scheme
    RateEuler(RunArgs),
    /// Rate of the compensated weighted sum
    RateSum(RunArgs),
    /// Single weighted sum against compensated sum
    Cancellation(RunArgs),
    /// Gap between monomial sums and their Skorohod counterparts
    SkorohodGap(RunArgs),
    /// Riemann-sum residual distribution
    Riemann(RunArgs),
    /// Limit distribution of the normalized Euler error
    DistEuler(RunArgs),
    /// Limit distribution of the compensated sum
    DistSum(RunArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    h: f64,
    /// Coarse steps
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Sub-steps per coarse step
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    index: u64,
    /// Output file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ChArgs {
    #[arg(long)]
    h: f64,
    /// Absolute tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file, or a manifest written by an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with status 2 when an acceptance threshold fails
    #[arg(long)]
    check: bool,
    /// Config overrides, `key=value` with JSON values
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Usage(String),
    Invalid(String),
    Error(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Error(_) => EXIT_ERROR,
        }
    }
}

impl From<fracsde::Error> for Failure {
    fn from(e: fracsde::Error) -> Self {
        match e {
            fracsde::Error::Config(_) | fracsde::Error::HurstOutOfRange(_) | fracsde::Error::HurstTooLarge(_) => {
                Failure::Invalid(e.to_string())
            }
            _ => Failure::Error(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

/// Table of configuration keys shown in `--help`.
fn keys_help() -> String {
    let mut s = String::from("Configuration keys (JSON config or KEY=VALUE overrides):\n");
    let width = CONFIG_KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    for (key, unit, default, meaning) in CONFIG_KEYS {
        s.push_str(&format!("  {key:<width$}  {meaning} [unit: {unit}; default: {default}]\n"));
    }
    s.push_str("\nFRACSDE_THREADS caps the worker pool.\nExit codes: 0 ok, 1 error, 2 check failed, 64 usage, 65 invalid config.");
    s
}

fn command() -> clap::Command {
    let help = keys_help();
    Cli::command()
        .after_help(help.clone())
        .mut_subcommands(|s| s.after_help(help.clone()))
}

fn kind_name(c: &Command) -> Option<&'static str> {
    Some(match c {
        Command::RateEuler(_) => "euler_rate",
        Command::RateSum(_) => "sum_rate",
        Command::Cancellation(_) => "cancellation",
        Command::SkorohodGap(_) => "skorohod_gap",
        Command::Riemann(_) => "riemann",
        Command::DistEuler(_) => "dist_euler",
        Command::DistSum(_) => "dist_sum",
        Command::SampleFbm(_) | Command::ComputeCh(_) => return None,
    })
}

/// Merges file, command kind, overrides and `FRACSDE_THREADS` into a config.
fn resolve_config(kind: &str, args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut obj = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Error(format!("{}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?;
            let v = match v {
                Value::Object(mut m) if m.contains_key("config_hash") => m.remove("config").unwrap_or(Value::Null),
                v => v,
            };
            match v {
                Value::Object(m) => m,
                _ => return Err(Failure::Invalid(format!("{}: config must be a JSON object", p.display()))),
            }
        }
        None => Map::new(),
    };
    match obj.get("kind") {
        Some(Value::String(k)) if k == kind => {}
        Some(k) => return Err(Failure::Invalid(format!("config kind {k} does not match the command ({kind})"))),
        None => {
            obj.insert("kind".into(), Value::String(kind.into()));
        }
    }
    for o in &args.overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("override {o:?} is not of the form key=value")))?;
        if !CONFIG_KEYS.iter().any(|k| k.0 == key) {
            return Err(Failure::Invalid(format!("unknown config key `{key}`")));
        }
        if key == "kind" {
            return Err(Failure::Invalid("`kind` is set by the command".into()));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        obj.insert(key.into(), value);
    }
    let mut config: ExperimentConfig = serde_json::from_value(Value::Object(obj))
        .map_err(|e| Failure::Invalid(format!("invalid config: {e}")))?;
    if let Ok(t) = std::env::var("FRACSDE_THREADS") {
        let t: usize = t
            .parse()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| Failure::Invalid(format!("FRACSDE_THREADS must be a positive integer, got {t:?}")))?;
        config.threads = Some(config.threads.map_or(t, |c| c.min(t)));
    }
    if let Some(d) = &args.out_dir {
        config.output_dir = Some(d.to_string_lossy().into_owned());
    }
    config.validate()?;
    Ok(config)
}

/// SHA-256 of the config as JSON with sorted keys. `threads` and `output_dir`
/// do not affect results and are left out.
fn config_hash(config: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Value::Object(m) = &mut v {
        m.remove("threads");
        m.remove("output_dir");
    }
    let digest = Sha256::digest(canonical(&v).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", Value::String((*k).clone()), canonical(&m[*k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

fn emit_manifest(config: &ExperimentConfig, dir: &Path, wall: f64, outputs: &[PathBuf]) -> Result<PathBuf, Failure> {
    let names: Vec<String> = outputs
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash(config),
        "config": config,
        "master_seed": config.master_seed,
        "build_id": build_id(),
        "wall_time_s": wall,
        "outputs": names,
    });
    let path = dir.join(format!("{}_manifest.json", config.kind.name()));
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Error(e.to_string()))? + "\n")?;
    Ok(path)
}

fn print_report(report: &Report) {
    match report {
        Report::Rate { series } => {
            for s in series {
                let f = &s.fit;
                println!(
                    "{}: slope {:.4} (95% CI [{:.4}, {:.4}]), r2 {:.4}",
                    s.statistic, f.slope, f.slope_ci_95[0], f.slope_ci_95[1], f.r2
                );
            }
        }
        Report::Dist { report: r } => {
            println!(
                "n {}: var_ratio {:.4} (se {:.4}), KS p {:.4}, corr {:?} (se {:.4}), M {}",
                r.n, r.var_ratio, r.var_ratio_se, r.ks_p, r.corr_with_x_functionals, r.corr_se, r.m
            );
        }
    }
}

fn run_experiment(kind: &str, args: &RunArgs) -> Result<u8, Failure> {
    let config = resolve_config(kind, args)?;
    let dir = PathBuf::from(config.output_dir.as_deref().unwrap_or("."));
    let start = Instant::now();
    let report = run(&config)?;
    let summary = Summary::new(&config, report);
    let mut outputs = persist(&summary, &dir)?;
    let manifest = emit_manifest(&config, &dir, start.elapsed().as_secs_f64(), &outputs)?;
    outputs.push(manifest);
    print_report(&summary.report);
    for c in &summary.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} = {:.4} in [{:.4}, {:.4}]", c.name, c.value, c.lo, c.hi);
    }
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    Ok(if args.check && !summary.passed() { EXIT_CHECK } else { 0 })
}

fn compute_ch(args: &ChArgs) -> Result<u8, Failure> {
    let h = HurstParam::new(args.h)?.require_rough()?;
    if !(args.tol > 0.0) {
        return Err(Failure::Invalid(format!("tol must be positive, got {}", args.tol)));
    }
    let r = c_h(h, args.tol)?;
    let out = json!({"h": args.h, "c_h": r.value, "k_max": r.k_max, "tail_bound": r.tail_bound});
    println!("{out}");
    Ok(0)
}

fn sample_fbm(args: &SampleArgs) -> Result<u8, Failure> {
    let h = HurstParam::new(args.h)?;
    let grid = TimeGrid::new(args.horizon, args.n, args.m).map_err(|e| Failure::Invalid(e.to_string()))?;
    let path = FbmSampler::new(grid, h)?.sample(args.seed, args.index)?;
    let file = fs::File::create(&args.out).map_err(|e| Failure::Error(format!("{}: {e}", args.out.display())))?;
    path.write_dump(std::io::BufWriter::new(file))?;
    println!("wrote {} ({} points)", args.out.display(), path.values().len());
    Ok(0)
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => {
                    eprintln!("{}", keys_help());
                    EXIT_USAGE
                }
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match &cli.command {
        Command::SampleFbm(a) => sample_fbm(a),
        Command::ComputeCh(a) => compute_ch(a),
        c @ (Command::RateEuler(a)
        | Command::RateSum(a)
        | Command::Cancellation(a)
        | Command::SkorohodGap(a)
        | Command::Riemann(a)
        | Command::DistEuler(a)
        | Command::DistSum(a)) => run_experiment(kind_name(c).expect("experiment command"), a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}\n\n{}", keys_help()),
                Failure::Invalid(m) => eprintln!("invalid configuration: {m}"),
                Failure::Error(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
