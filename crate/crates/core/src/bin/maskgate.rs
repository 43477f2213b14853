use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Duration, Utc};
use clap::{Parser, Subcommand};
use semver::Version;
use serde_json::json;

use maskgate::bench::{run_experiment, BenchConfig, Experiment};
use maskgate::workspace::{
    cmd_apply, cmd_bitmap_build, cmd_compile, cmd_gc, cmd_maintain, cmd_route, cmd_validate, ApplyArgs, GcArgs,
    Workspace,
};
use maskgate::Error;

/// Compile, route and apply purpose-based masking views.
#[derive(Parser)]
#[command(name = "maskgate", version)]
struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check schemas, label assignments and the policy catalog.
    Validate,
    /// Compile and register views.
    Compile {
        #[arg(long)]
        relation: Option<String>,
        #[arg(long)]
        purpose: Option<String>,
    },
    /// Run a view over a JSON-lines file.
    Apply {
        /// `purpose.relation[@version]`
        view: String,
        input: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// RFC 3339 time to resolve consents at (default: now).
        #[arg(long, value_parser = parse_time)]
        access_time: Option<DateTime<Utc>>,
        /// Compare against the reference masking of the current catalog.
        #[arg(long)]
        oracle: bool,
    },
    /// Measure masking overhead on synthetic data.
    Bench {
        /// field-size, depth, policies, consent-rate or array.
        experiment: Experiment,
        #[arg(long, default_value_t = 100_000)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 0.0)]
        consent_rate: f64,
        /// Comma-separated x values overriding the defaults.
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<f64>>,
    },
    /// Resolve a table access to its view.
    Route {
        relation: String,
        #[arg(long)]
        purpose: Option<String>,
        /// Service name from identities.json.
        #[arg(long)]
        service: Option<String>,
        #[arg(long)]
        pin: Option<Version>,
        #[arg(long)]
        environment: Option<String>,
    },
    /// Recompile views whose inputs changed; report pinned consumers behind latest.
    Maintain,
    /// Remove old view versions and consent snapshots.
    Gc {
        #[arg(long)]
        keep_latest: Option<usize>,
        #[arg(long)]
        min_age_days: Option<i64>,
        #[arg(long)]
        snapshot_retention_days: Option<i64>,
    },
    /// Build consent snapshots from a CSV or JSON-lines consent table.
    BitmapBuild {
        input: PathBuf,
        #[arg(long, value_parser = parse_time)]
        as_of: Option<DateTime<Utc>>,
    },
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<(serde_json::Value, Option<String>), Error> {
    if let Command::Bench {
        experiment,
        rows,
        repetitions,
        consent_rate,
        points,
    } = &cli.command
    {
        let cfg = BenchConfig {
            rows: *rows,
            repetitions: (*repetitions).max(5),
            seed: cli.seed,
            consent_rate: *consent_rate,
            points: points.clone(),
            ..BenchConfig::default()
        };
        let report = run_experiment(*experiment, &cfg);
        let table = report.table();
        return Ok((serde_json::to_value(&report).expect("report serializes"), Some(table)));
    }
    let ws = Workspace::open(&cli.workspace)?;
    let out = match &cli.command {
        Command::Validate => cmd_validate(&ws)?,
        Command::Compile { relation, purpose } => cmd_compile(&ws, relation.as_deref(), purpose.as_deref())?,
        Command::Apply {
            view,
            input,
            output,
            access_time,
            oracle,
        } => cmd_apply(
            &ws,
            &ApplyArgs {
                view,
                input,
                output: output.as_deref(),
                access_time: *access_time,
                oracle: *oracle,
            },
        )?,
        Command::Route {
            relation,
            purpose,
            service,
            pin,
            environment,
        } => cmd_route(
            &ws,
            relation,
            purpose.as_deref(),
            service.as_deref(),
            pin.clone(),
            environment.as_deref(),
        )?,
        Command::Maintain => cmd_maintain(&ws)?,
        Command::Gc {
            keep_latest,
            min_age_days,
            snapshot_retention_days,
        } => cmd_gc(
            &ws,
            &GcArgs {
                keep_latest: *keep_latest,
                min_age: min_age_days.map(Duration::days),
                snapshot_retention: snapshot_retention_days.map(Duration::days),
                now: Utc::now(),
            },
        )?,
        Command::BitmapBuild { input, as_of } => cmd_bitmap_build(&ws, input, *as_of)?,
        Command::Bench { .. } => unreachable!(),
    };
    Ok((out, None))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, text)) => {
            match text {
                Some(t) if !cli.json => print!("{t}"),
                _ if cli.json => println!("{out}"),
                _ => println!("{}", serde_json::to_string_pretty(&out).expect("summary serializes")),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if e.is_validation() { 1 } else { 2 };
            if cli.json {
                let mut report = json!({ "error": e.to_string(), "kind": if code == 1 { "validation" } else { "runtime" } });
                if let Error::PairFailures { report: r, .. } = &e {
                    report["report"] = r.clone();
                }
                println!("{report}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}
