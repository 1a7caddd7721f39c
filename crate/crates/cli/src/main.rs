mod commands;
mod config;

use clap::Parser;
use config::{Cli, Command, ConfigError};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tradeoff(args) => commands::tradeoff(&args),
        Command::Run(args) => commands::run(&args),
        Command::VerifyFormalism(args) => commands::verify_formalism(&args),
        Command::Selftest(args) => commands::selftest(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_summary(&err));
            ExitCode::from(if err.downcast_ref::<ConfigError>().is_some() { 2 } else { 1 })
        }
    }
}

/// One-line JSON description of a failure.
fn error_summary(err: &anyhow::Error) -> String {
    let (kind, field) = if let Some(c) = err.downcast_ref::<ConfigError>() {
        ("config", Some(c.field))
    } else if let Some(e) = err.downcast_ref::<fdrbayes::Error>() {
        match e {
            fdrbayes::Error::InvalidPrior(_) => ("config", Some("prior")),
            fdrbayes::Error::InvalidArgument { name, .. } => ("config", Some(*name)),
            fdrbayes::Error::Dimension(_) => ("dimension", None),
            fdrbayes::Error::NonConvergence { .. } => ("nonconvergence", None),
            fdrbayes::Error::Estimation(_) => ("estimation", None),
            fdrbayes::Error::Parse(_) => ("parse", None),
            fdrbayes::Error::Io(_) => ("io", None),
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        ("io", None)
    } else {
        ("internal", None)
    };
    serde_json::json!({
        "status": "error",
        "kind": kind,
        "field": field,
        "message": format!("{err:#}"),
    })
    .to_string()
}
