//! `qslab` command line front end.
//!
//! Reads a JSON config naming one command, runs it, and writes a result
//! envelope (JSON, or CSV when the command produces row data). Identical
//! (config, seed) pairs produce byte-identical result files; wall-clock time
//! stays out of them, going to stdout and a `.timing.txt` sidecar when
//! results land in a file, and to stderr when results stream to stdout.
//!
//! Exit codes: 0 success, 1 bad input or engine failure, 2 infeasible design
//! (reported in the envelope, not a crash).

mod commands;
mod config;
mod report;

use clap::Parser;
use commands::{CliError, RunOutput};
use config::{Format, Tolerances};
use report::Envelope;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "qslab", version, about = "state-set machines, superposers and no-go witnesses")]
struct Args {
    /// JSON config file naming the command and its inputs.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's output format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override every tolerance with one value.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for batched trials (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Common fields every command config carries, extracted before dispatch.
struct Common {
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    tolerances: Tolerances,
}

fn extract_common(doc: &serde_json::Value, args: &Args) -> Result<Common, String> {
    let seed = args.seed.unwrap_or_else(|| {
        doc.get("seed").and_then(|v| v.as_u64()).unwrap_or(0)
    });
    let out = args.out.clone().or_else(|| {
        doc.get("output")
            .and_then(|o| o.get("path"))
            .and_then(|p| p.as_str())
            .map(PathBuf::from)
    });
    let format = match &args.format {
        Some(f) => *f,
        None => match doc
            .get("output")
            .and_then(|o| o.get("format"))
            .and_then(|f| f.as_str())
        {
            None => Format::Json,
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            Some(other) => return Err(format!("output.format: unknown format {other:?}")),
        },
    };
    let mut tolerances: Tolerances = match doc.get("tolerances") {
        None => Tolerances::default(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| format!("tolerances: {e}"))?,
    };
    if let Some(t) = args.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err("--tol must be a positive finite number".into());
        }
        tolerances.override_all(t);
    }
    Ok(Common {
        seed,
        out,
        format,
        tolerances,
    })
}

/// Re-parses the config with overrides applied so the envelope echoes what ran.
fn apply_overrides(doc: &mut serde_json::Value, common: &Common) {
    let obj = doc.as_object_mut().expect("validated as object");
    obj.insert("seed".into(), serde_json::json!(common.seed));
    obj.insert(
        "tolerances".into(),
        serde_json::to_value(&common.tolerances).expect("tolerances serialize"),
    );
    match &common.out {
        Some(p) => {
            obj.insert(
                "output".into(),
                serde_json::json!({
                    "path": p,
                    "format": match common.format {
                        Format::Json => "json",
                        Format::Csv => "csv",
                    },
                }),
            );
        }
        None => {
            obj.remove("output");
        }
    }
}

fn dispatch(command: &str, doc: serde_json::Value, common: &Common) -> Result<RunOutput, CliError> {
    let parse_err = |e: serde_json::Error| CliError::Config(format!("{command}: {e}"));
    let tol = &common.tolerances;
    match command {
        "design-clone" => {
            let cfg: config::DesignCloneConfig =
                serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_design_clone(&cfg, tol)
        }
        "superpose-finite" => {
            let cfg: config::SuperposeFiniteConfig =
                serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_superpose_finite(&cfg, tol)
        }
        "superpose-overlap" => {
            let cfg: config::SuperposeOverlapConfig =
                serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_superpose_overlap(&cfg, tol)
        }
        "nogo" => {
            let cfg: config::NogoConfig = serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_nogo(&cfg, tol)
        }
        "bounds" => {
            let cfg: config::BoundsConfig = serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_bounds(&cfg, tol)
        }
        "selftest" => {
            let cfg: config::SelftestConfig = serde_json::from_value(doc).map_err(parse_err)?;
            commands::run_selftest(&cfg, tol)
        }
        other => Err(CliError::Config(format!(
            "command: unknown command {other:?} (expected design-clone, superpose-finite, \
             superpose-overlap, nogo, bounds or selftest)"
        ))),
    }
}

fn fail(message: &str) -> ExitCode {
    eprintln!("qslab: {message}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let args = Args::parse();

    let raw = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => return fail(&format!("{}: {e}", args.config.display())),
    };
    let mut doc: serde_json::Value = match serde_json::from_str(&raw) {
        Ok(v) => v,
        Err(e) => return fail(&format!("{}: {e}", args.config.display())),
    };
    if !doc.is_object() {
        return fail("config must be a JSON object");
    }
    let command = match doc.get("command").and_then(|c| c.as_str()) {
        Some(c) => c.to_string(),
        None => return fail("config needs a string \"command\" field"),
    };
    let common = match extract_common(&doc, &args) {
        Ok(c) => c,
        Err(m) => return fail(&m),
    };
    apply_overrides(&mut doc, &common);

    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return fail("--jobs must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return fail(&format!("thread pool: {e}"));
        }
    }

    let started = Instant::now();
    let run = dispatch(&command, doc.clone(), &common);
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut envelope = Envelope {
        command: command.clone(),
        library_version: qslab::VERSION,
        seed: common.seed,
        status: "ok",
        config: doc,
        error: None,
        results: None,
    };

    let (code, csv) = match run {
        Ok(output) => {
            envelope.results = Some(output.results);
            if output.failed {
                envelope.status = "failed";
                (ExitCode::from(1), output.csv)
            } else {
                (ExitCode::SUCCESS, output.csv)
            }
        }
        Err(CliError::Config(message)) => return fail(&message),
        Err(CliError::Engine { code, message }) => {
            eprintln!("qslab: {code}: {message}");
            envelope.status = "error";
            envelope.error = Some(report::ErrorBody { code, message });
            (ExitCode::from(1), None)
        }
        Err(CliError::Infeasible { code, message }) => {
            envelope.status = "infeasible";
            envelope.error = Some(report::ErrorBody { code, message });
            (ExitCode::from(2), None)
        }
    };

    let out_path = common.out.as_deref();
    let write_result = match common.format {
        Format::Json => report::write_json(&envelope, out_path),
        Format::Csv => match out_path {
            None => return fail("csv output needs an output path (output.path or --out)"),
            Some(path) => {
                // CSV carries the row data; the envelope lands next to it so
                // the run stays reproducible from its files.
                let envelope_path = path.with_extension("meta.json");
                report::write_json(&envelope, Some(&envelope_path)).and_then(|()| match &csv {
                    Some((header, rows)) => report::write_csv(header, rows, path),
                    None if envelope.status != "ok" => Ok(()),
                    None => anyhow::bail!(
                        "{command}: no single row table to tabulate; use json format"
                    ),
                })
            }
        },
    };
    if let Err(e) = write_result {
        return fail(&format!("writing results: {e}"));
    }
    if let Err(e) = report::report_timing(out_path, elapsed_ms) {
        return fail(&format!("recording timing: {e}"));
    }
    code
}
