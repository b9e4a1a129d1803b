//! The `mentalgen` command line: datasets, features, clustering study,
//! training, prediction, scripted sessions and the service.

pub mod args;
pub mod commands;
pub mod error;
pub mod policy;
pub mod provenance;

use args::{Cli, Command};
pub use error::CliError;

/// Runs a parsed command. `argv` is stamped into outputs.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => commands::synth(a, seed, argv),
        Command::Preprocess(a) => commands::preprocess(a, seed, argv),
        Command::ClusterEval(a) => commands::cluster_eval(a, seed, argv),
        Command::Train(a) => commands::train(a, seed, argv),
        Command::Predict(a) => commands::predict_cmd(a, seed, argv),
        Command::Simulate(a) => commands::simulate(a, seed, argv),
        Command::Report(a) => commands::report(a),
        Command::Serve(a) => commands::serve(a),
    }
}
