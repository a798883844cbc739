mod args;
mod commands;
mod model_spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::{json, Value};

use phidep::Error;

use args::{Cli, Command};
use commands::Artifact;

/// Expand `--config FILE` into flags placed right after the subcommand, so
/// that flags given on the command line (which come later) take precedence.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", Path::new(&path).display())))?;
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"');
        match value {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    let mut out = argv;
    let at = 2.min(out.len());
    out.splice(at..at, extra);
    Ok(out)
}

fn wall_clock() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(|secs| UNIX_EPOCH + Duration::from_secs(secs))
        .unwrap_or_else(SystemTime::now);
    humantime::format_rfc3339_seconds(now).to_string()
}

fn provenance(cli: &Cli) -> Value {
    let common = cli.command.common();
    json!({
        "tool": "phidep",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config": serde_json::to_value(&cli.command).unwrap_or(Value::Null),
        "seed": common.seed,
        "threads": rayon::current_num_threads(),
        "wall_clock": wall_clock(),
    })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string())),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.command.common().threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--threads {n}: {e}")))?;
    }
    let artifact = match &cli.command {
        Command::Validate(a) => commands::validate(a)?,
        Command::Estimate(a) => commands::estimate(a)?,
        Command::Fit(a) => commands::fit(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Rolling(a) => commands::rolling(a)?,
        Command::Contagion(a) => commands::contagion(a)?,
    };
    let text = match artifact {
        Artifact::Csv(s) => s,
        Artifact::Json(mut v) => {
            if let Value::Object(map) = &mut v {
                map.insert("provenance".into(), provenance(cli));
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_output(cli.command.common().out.as_deref(), &text)
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("phidep: error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phidep: error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
