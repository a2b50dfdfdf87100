mod config;

/// Like `println!`, but a closed stdout (for example a pipe into `head`)
/// is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use hesitator_core::dialogue::TranscriptRecord;
use hesitator_core::hesitation::{clamp_bounds, CalibrationTable, FACTOR_NAMES};
use hesitator_experiments::export::{overload_csv, sweep_csv, sweep_svg};
use hesitator_experiments::{
    run_ablation, run_condition_full, run_overload_experiment, run_sweep, total_sign_changes, BuiltProviders, Curve,
    ExperimentError, ProviderNames,
};

use config::{load_calibration, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hesitator", version, about = "Simulate shoppers who choose, hesitate and defer under choice overload")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for session seed splitting.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sessions per condition or grid point.
    #[arg(long, global = true)]
    sessions: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Perception and response provider.
    #[arg(long, global = true, value_parser = ["rule", "external"])]
    provider: Option<String>,
    /// Calibration table overriding the defaults.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run sessions of one condition and write their transcripts.
    Simulate,
    /// Run one of the experiment studies.
    Experiment {
        #[command(subcommand)]
        study: Study,
    },
    /// Check a calibration table and report the attainable effect range.
    ValidateCalibration {
        /// Table to check; defaults to --calibration or the built-in table.
        path: Option<PathBuf>,
    },
    /// Work with transcript files.
    Transcript {
        #[command(subcommand)]
        action: TranscriptAction,
    },
}

#[derive(Subcommand, Debug)]
enum Study {
    /// Low, Medium and Severe overload with a paired Wilcoxon test.
    Overload,
    /// Success-rate curves over information load.
    Curves {
        /// total_info, attributes or assortment; all three when omitted.
        #[arg(long)]
        curve: Option<String>,
    },
    /// Structured selection against flat rating over one sweep.
    Ablation {
        #[arg(long, default_value = "attributes")]
        curve: String,
    },
}

#[derive(Subcommand, Debug)]
enum TranscriptAction {
    /// Summarize a transcript file turn by turn.
    Inspect { file: PathBuf },
}

/// Exit status 2 for configuration problems, 1 for failures while running.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn experiment_err(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::Config(_) | ExperimentError::Registry(_) => Failure::Config(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let overrides = Overrides {
        seed: cli.seed,
        sessions: cli.sessions,
        out: cli.out.clone(),
        workers: cli.workers,
        provider: cli.provider.clone(),
        calibration: cli.calibration.clone(),
    };
    match &cli.command {
        Command::ValidateCalibration { path } => {
            let base = RunConfig::load(cli.config.as_deref()).map_err(config_err)?;
            validate_calibration(path.as_deref().or(cli.calibration.as_deref()), base.engine.user.hesitation.p_base)
        }
        Command::Transcript { action: TranscriptAction::Inspect { file } } => inspect(file),
        Command::Simulate => {
            let cfg = resolve(&cli, &overrides)?;
            simulate(&cfg)
        }
        Command::Experiment { study } => {
            let cfg = resolve(&cli, &overrides)?;
            experiment(&cfg, study)
        }
    }
}

fn resolve(cli: &Cli, o: &Overrides) -> Outcome<RunConfig> {
    RunConfig::load(cli.config.as_deref()).and_then(|c| c.resolve(o)).map_err(config_err)
}

struct Prepared {
    catalog: hesitator_core::Catalog,
    providers: BuiltProviders,
}

fn prepare(cfg: &RunConfig, names: &ProviderNames) -> Outcome<Prepared> {
    let catalog = cfg.catalog().map_err(config_err)?;
    let providers = BuiltProviders::build(names, &cfg.llm).map_err(experiment_err)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display())).map_err(runtime_err)?;
    write(&cfg.out.join("effective_config.toml"), cfg.to_toml().as_bytes())?;
    Ok(Prepared { catalog, providers })
}

fn write(path: &Path, bytes: &[u8]) -> Outcome<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())).map_err(runtime_err)
}

fn simulate(cfg: &RunConfig) -> Outcome<()> {
    let p = prepare(cfg, &cfg.provider_names())?;
    let condition = cfg.simulate.condition();
    let results = run_condition_full(&cfg.engine, &p.catalog, p.providers.view(), &condition, &cfg.settings(), "simulate")
        .map_err(experiment_err)?;
    let dir = cfg.out.join("transcripts");
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).map_err(runtime_err)?;
    let width = results.len().saturating_sub(1).to_string().len().max(4);
    for (i, r) in results.iter().enumerate() {
        write(&dir.join(format!("session_{i:0width$}.jsonl")), r.transcript_jsonl().as_bytes())?;
    }
    let n = results.len();
    let purchases = results.iter().filter(|r| r.purchased).count();
    let mean_turns = results.iter().map(|r| r.terminal_turn as f64).sum::<f64>() / n as f64;
    let summary = serde_json::json!({
        "sessions": n,
        "purchases": purchases,
        "sr": purchases as f64 / n as f64,
        "mean_turns": mean_turns,
    });
    write(&cfg.out.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&summary).expect("json")).as_bytes())?;
    say!("sessions {n}  purchases {purchases}  SR {:.3}  mean turns {mean_turns:.2}", purchases as f64 / n as f64);
    say!("transcripts written to {}", dir.display());
    Ok(())
}

fn parse_curve(s: &str) -> Outcome<Curve> {
    s.parse::<Curve>().map_err(|e| Failure::Config(anyhow!(e)))
}

fn experiment(cfg: &RunConfig, study: &Study) -> Outcome<()> {
    match study {
        Study::Overload => {
            let p = prepare(cfg, &cfg.provider_names())?;
            let r = run_overload_experiment(&cfg.conditions, &cfg.engine, &p.catalog, p.providers.view(), &cfg.settings())
                .map_err(experiment_err)?;
            let path = cfg.out.join("overload.csv");
            write(&path, &overload_csv(&r).map_err(experiment_err)?)?;
            say!("{:<10} {:>4} {:>4} {:>4} {:>9} {:>7} {:>10}", "condition", "v_tp", "v_tf", "v_u", "purchases", "SR", "mean turns");
            for c in &r.conditions {
                let k = &c.condition;
                say!(
                    "{:<10} {:>4} {:>4} {:>4} {:>9} {:>7.3} {:>10.2}",
                    k.name, k.time_pressure, k.format, k.uncertainty, c.purchases, c.sr, c.mean_turns
                );
            }
            match (&r.test, &r.diagnostic) {
                (Some(t), _) => say!(
                    "{} vs {}: SR difference {:+.3}, Wilcoxon W+ = {}, n = {}, two-sided p = {:.3e}",
                    r.compared.0,
                    r.compared.1,
                    r.sr_difference(),
                    t.statistic,
                    t.n,
                    t.p_value
                ),
                (None, Some(d)) => say!("{} vs {}: {d}", r.compared.0, r.compared.1),
                (None, None) => {}
            }
            say!("results written to {}", path.display());
        }
        Study::Curves { curve } => {
            let curves = match curve {
                Some(s) => vec![parse_curve(s)?],
                None => vec![Curve::TotalInfo, Curve::Attributes, Curve::Assortment],
            };
            let p = prepare(cfg, &cfg.provider_names())?;
            for c in curves {
                let r = run_sweep(&cfg.sweep.spec(c), &cfg.engine, &p.catalog, p.providers.view(), &cfg.settings())
                    .map_err(experiment_err)?;
                write(&cfg.out.join(format!("curve_{c}.csv")), &sweep_csv(&[&r]).map_err(experiment_err)?)?;
                write(&cfg.out.join(format!("curve_{c}.svg")), sweep_svg(&[&r]).map_err(experiment_err)?.as_bytes())?;
                print_sweep(&r);
            }
            say!("results written to {}", cfg.out.display());
        }
        Study::Ablation { curve } => {
            let c = parse_curve(curve)?;
            let structured_names = ProviderNames { strategy: "structured".into(), ..cfg.provider_names() };
            let flat_names = ProviderNames { strategy: "flat_rating".into(), ..cfg.provider_names() };
            let p = prepare(cfg, &structured_names)?;
            let flat = BuiltProviders::build(&flat_names, &cfg.llm).map_err(experiment_err)?;
            let r = run_ablation(&cfg.sweep.spec(c), &cfg.engine, &p.catalog, p.providers.view(), flat.view(), &cfg.settings())
                .map_err(experiment_err)?;
            let parts = [&r.structured, &r.flat];
            write(&cfg.out.join(format!("ablation_{c}.csv")), &sweep_csv(&parts).map_err(experiment_err)?)?;
            write(&cfg.out.join(format!("ablation_{c}.svg")), sweep_svg(&parts).map_err(experiment_err)?.as_bytes())?;
            for s in parts {
                print_sweep(s);
                say!("  sign changes in first differences: {}", total_sign_changes(s));
            }
            say!("results written to {}", cfg.out.display());
        }
    }
    Ok(())
}

fn print_sweep(r: &hesitator_experiments::SweepResult) {
    say!("{} curve, {} selection ({})", r.curve, r.variant, r.curve.axis_label());
    let mut levels: Vec<_> = r.points.iter().map(|p| p.uncertainty).collect();
    levels.dedup();
    for u in levels {
        let cells: Vec<String> = r.series(u).iter().map(|(x, sr)| format!("{x}:{sr:.3}")).collect();
        say!("  v_u={u}  {}", cells.join("  "));
    }
}

fn validate_calibration(path: Option<&Path>, p_base: f64) -> Outcome<()> {
    let table = match path {
        Some(p) => load_calibration(p).map_err(config_err)?,
        None => CalibrationTable::default(),
    };
    say!("{:<12} {:>6} {:>9} {:>9}", "factor", "beta", "delta_min", "delta_max");
    for (name, f) in FACTOR_NAMES.iter().zip(table.factors()) {
        say!("{name:<12} {:>6.2} {:>9.2} {:>9.2}", f.beta, f.delta_min, f.delta_max);
    }
    say!(
        "decision goal: intent {}, accountability {}",
        table.decision_goal.decision_intent, table.decision_goal.decision_accountability
    );
    let (lo, hi) = table.attainable_range();
    let (clo, chi) = clamp_bounds(p_base);
    say!("attainable d_total range: [{lo:.4}, {hi:.4}]");
    say!("clamp interval at P_base = {p_base}: [{clo:.4}, {chi:.4}]");
    say!("calibration table is valid");
    Ok(())
}

fn inspect(file: &Path) -> Outcome<()> {
    let f = fs::File::open(file).with_context(|| format!("cannot open {}", file.display())).map_err(config_err)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", file.display())).map_err(config_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TranscriptRecord =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", file.display(), i + 1)).map_err(config_err)?;
        records.push(r);
    }
    if records.is_empty() {
        return Err(Failure::Config(anyhow!("{} holds no transcript records", file.display())));
    }
    for r in &records {
        let p = r.p_accept.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
        let d = r.d_total.map_or_else(|| "-".to_string(), |d| format!("{d:+.4}"));
        say!(
            "turn {:>2}  {:<6}  {:<20}  items {:<24}  p_accept {p:<7}  d_total {d}",
            r.turn,
            r.outcome.to_string(),
            r.user_action.as_str(),
            r.sales_items.join(","),
        );
        say!("         user: {}", r.user_text);
    }
    let last = records.last().expect("nonempty");
    say!("{} turns, final outcome {}", records.len(), last.outcome);
    Ok(())
}
