mod args;
mod commands;
mod run;

use std::io::Write as _;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use log::{error, info};

use args::{Cli, Command};
use commands::{Finished, Status};
use run::{file_digest, invalid, CliError, ConfigFile, Manifest, Resolver, Run};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();

    match execute(cli, argv) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::RangeExit { iteration, detail }) => {
            info!("stopped at iteration {iteration}: {detail}");
            ExitCode::from(3)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CliError>() {
            return match c {
                CliError::Validation(_) => 2,
                CliError::Mismatch(_) => 1,
            };
        }
        if let Some(q) = cause.downcast_ref::<qmaxent::Error>() {
            return if q.is_validation() { 2 } else { 1 };
        }
        if cause.downcast_ref::<qmaxent::EmbeddingError>().is_some() {
            return 2;
        }
    }
    1
}

fn execute(cli: Cli, argv: Vec<String>) -> anyhow::Result<Status> {
    if let Command::Rerun(_) = cli.command {
        let path = cli.manifest.ok_or_else(|| invalid("rerun needs --manifest <file>"))?;
        return rerun(&path);
    }
    let mut run = Run::new(argv, Resolver::default());
    if let Some(path) = &cli.config {
        run.cfg = Resolver::new(ConfigFile::parse(&run.read(path)?)?);
    }
    let Finished { status, primary } = match &cli.command {
        Command::GenData(a) => commands::gen_data(&mut run, a)?,
        Command::Embed(a) => commands::embed(&mut run, a)?,
        Command::Train(a) => commands::train(&mut run, a)?,
        Command::Reconstruct(a) => commands::reconstruct(&mut run, a)?,
        Command::Classify(a) => commands::classify(&mut run, a)?,
        Command::Sample(a) => commands::sample_cmd(&mut run, a)?,
        Command::Eval(a) => commands::eval(&mut run, a)?,
        Command::Render(a) => commands::render(&mut run, a)?,
        Command::Rerun(_) => unreachable!("handled above"),
    };
    let manifest_path = cli.manifest.unwrap_or(primary);
    let manifest = run.manifest()?;
    std::fs::write(&manifest_path, manifest.to_text())
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    info!("manifest written to {}", manifest_path.display());
    Ok(status)
}

fn rerun(path: &std::path::Path) -> anyhow::Result<Status> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m = Manifest::parse(&text)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    std::env::set_current_dir(&m.cwd).with_context(|| format!("entering {}", m.cwd.display()))?;
    for (p, d) in &m.inputs {
        if &file_digest(p)? != d {
            return Err(CliError::Mismatch(format!("input {} changed since the recorded run", p.display())).into());
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("qmaxent".to_string()).chain(m.argv.iter().cloned()))
        .map_err(|e| invalid(format!("recorded arguments no longer parse: {e}")))?;
    if let Command::Rerun(_) = cli.command {
        return Err(invalid("a manifest cannot record a rerun"));
    }
    let status = execute(cli, m.argv.clone())?;
    for (p, d) in &m.outputs {
        if &file_digest(p)? != d {
            return Err(CliError::Mismatch(format!("output {} differs from the recorded run", p.display())).into());
        }
    }
    info!("rerun reproduced {} output file(s)", m.outputs.len());
    Ok(status)
}
