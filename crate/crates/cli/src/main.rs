//! `rwre` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid model or failed check, 2 numerical
//! failure, 64 usage error. `RWRE_LOG` sets the log filter.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use rwre_core::model_file::parse_model;
use rwre_core::RwreError;

use args::{Cli, Command};
use commands::{LimitArgs, Outcome, TailsArgs};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn exit_code(e: &RwreError) -> u8 {
    match e {
        RwreError::NonStochasticRow { .. }
        | RwreError::InvalidEntry { .. }
        | RwreError::OmegaOutOfRange { .. }
        | RwreError::Ellipticity { .. }
        | RwreError::BadEpsilon(_)
        | RwreError::Dimension(_)
        | RwreError::Reducible { .. }
        | RwreError::ModelFile(_)
        | RwreError::Io(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

fn run(cmd: Command) -> Result<Outcome, RwreError> {
    let common = cmd.common();
    let bytes = std::fs::read(&common.config)
        .map_err(|e| RwreError::ModelFile(format!("cannot read {}: {e}", common.config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| RwreError::ModelFile(e.to_string()))?;
    let spec = parse_model(&text)?;
    let hash = output::config_hash(&bytes);
    let seed = common.seed;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| RwreError::Numerical(e.to_string()))?;
    log::info!("config sha256 {hash}, seed {seed}, {} threads", pool.current_num_threads());

    let outcome = pool.install(|| match &cmd {
        Command::Validate { .. } => commands::validate_cmd(&spec),
        Command::Kappa { .. } => commands::kappa_cmd(&spec),
        Command::Speed { samples, samples_file, tol, .. } => {
            commands::speed_cmd(&spec, *samples, samples_file.as_deref(), *tol, seed)
        }
        Command::SimulateWalk { n, replicas, step_cap, .. } => {
            commands::walk_cmd(&spec, *n, *replicas, seed, *step_cap)
        }
        Command::SimulateBranching { n, replicas, .. } => commands::branching_cmd(&spec, *n, *replicas, seed),
        Command::Tails { samples, tol, top_fraction, threshold, dump, .. } => {
            let a = TailsArgs {
                samples: *samples,
                tol: *tol,
                top_fraction: *top_fraction,
                threshold: *threshold,
                dump: dump.as_deref(),
            };
            commands::tails_cmd(&spec, a, seed, &hash)
        }
        Command::LimitCheck { n, replicas, side, reference_walk, step_cap, .. } => {
            let a = LimitArgs {
                n: *n,
                replicas: *replicas,
                side: *side,
                reference_walk: *reference_walk,
                step_cap: *step_cap,
            };
            commands::limit_cmd(&spec, a, seed)
        }
    })?;
    if let Some(path) = &cmd.common().out {
        outcome.table.write(path, &hash, seed)?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("RWRE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(o) => {
            print!("{}", o.summary);
            if o.validation_failed {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&RwreError::BadEpsilon(0.7)), EXIT_VALIDATION);
        assert_eq!(exit_code(&RwreError::Reducible { components: vec![] }), EXIT_VALIDATION);
        assert_eq!(exit_code(&RwreError::NoKappa("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&RwreError::Quadrature { bound: 1.0, target: 0.1 }), EXIT_NUMERICAL);
    }
}
