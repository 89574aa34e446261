//! Thin command-line front end: parses flags, validates or runs a JSON
//! experiment config, and maps errors to exit codes (2 schema, 3 resource
//! cap, 4 numerical failure).

use std::path::PathBuf;
use std::process::ExitCode;
use szegolab::experiment;

struct Args {
    config: PathBuf,
    validate: bool,
    workers: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

const USAGE: &str = "usage: szegolab --config PATH [--validate] [--workers K] [--out DIR] [--seed S]

Runs the experiment described by the JSON config. With --validate, lists
schema problems and exits without running. SZEGOLAB_WORKERS is honored when
neither --workers nor the config sets a worker count.
Exit codes: 0 ok, 2 schema error, 3 resource cap, 4 numerical failure.";

fn parse_args() -> Result<Args, String> {
    let mut config = None;
    let mut validate = false;
    let mut workers = None;
    let mut out = None;
    let mut seed = None;
    let mut it = std::env::args().skip(1);
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                config = Some(PathBuf::from(
                    it.next().ok_or("--config needs a path")?,
                ))
            }
            "--validate" => validate = true,
            "--workers" => {
                workers = Some(
                    it.next()
                        .ok_or("--workers needs a count")?
                        .parse()
                        .map_err(|_| "--workers must be an integer")?,
                )
            }
            "--out" => out = Some(PathBuf::from(it.next().ok_or("--out needs a directory")?)),
            "--seed" => {
                seed = Some(
                    it.next()
                        .ok_or("--seed needs a value")?
                        .parse()
                        .map_err(|_| "--seed must be a 64-bit integer")?,
                )
            }
            "--help" | "-h" => {
                println!("{USAGE}");
                std::process::exit(0);
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(Args {
        config: config.ok_or("--config is required")?,
        validate,
        workers,
        out,
        seed,
    })
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut raw: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config is not valid JSON: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        raw["seed"] = serde_json::json!(seed);
    }
    if args.validate {
        let issues = experiment::validate(&raw);
        if issues.is_empty() {
            println!("config ok");
            return ExitCode::from(0);
        }
        for issue in &issues {
            println!("{}: {}", issue.field, issue.message);
        }
        return ExitCode::from(2);
    }
    let cfg = match experiment::parse_config(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("szegolab-out"));
    let workers = experiment::resolve_workers(args.workers, &cfg);
    let body = || match experiment::run(&cfg, &out_dir) {
        Ok(manifest) => {
            println!(
                "{} finished; {} outputs in {}",
                cfg.kind.name(),
                manifest.outputs.len(),
                out_dir.display()
            );
            ExitCode::from(0)
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": format!("{e}"),
                "exit_code": e.exit_code(),
            });
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    };
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        pool.install(body)
    } else {
        body()
    }
}
