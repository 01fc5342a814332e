mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use splinekernel::io::{unix_now, RunManifest};

use crate::args::Cli;
use crate::commands::{Failure, Outcome};

fn manifest_path(cli: &Cli) -> PathBuf {
    if let Some(p) = &cli.manifest {
        return p.clone();
    }
    match cli.command.out() {
        Some(out) => {
            let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".manifest.json");
            out.with_file_name(name)
        }
        None => PathBuf::from(format!("{}.manifest.json", cli.command.name())),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // clap reports usage errors with status 2 and help/version with 0.
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let started = unix_now();
    let threads = cli.threads.filter(|&t| t > 0);
    let result = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(pool) => pool.install(|| commands::run(&cli.command)),
        Err(e) => Err(Failure::usage(format!("cannot start thread pool: {e}"))),
    };
    let (code, outcome, error) = match result {
        Ok(o) => (0, o, None),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (f.code, Outcome::default(), Some(f.message))
        }
    };
    let manifest = RunManifest {
        tool: "splinekernel".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        argv,
        inputs: outcome.inputs,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        seed: outcome.seed,
        threads: Some(rayon_threads(threads)),
        settings: serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null),
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: code,
        error,
    };
    if let Err(e) = manifest.write(&manifest_path(&cli)) {
        eprintln!("error: cannot write run manifest: {e}");
        if code == 0 {
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code as u8)
}

fn rayon_threads(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
