//! Command-line harness for row space pursuit experiments: synthetic data,
//! compression, solving, clustering, evaluation and phase-transition sweeps.
//!
//! The `rsp` binary is a thin wrapper around [`run`]; exit codes come from
//! [`CliError::exit_code`].

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod sweep;

pub use args::{Cli, Command, GlobalArgs};
pub use error::{CliError, Result};
pub use formats::{read_labels, read_matrix, write_labels, write_matrix, Format};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => commands::synth(g, a),
        Command::Compress(a) => commands::compress_cmd(g, a),
        Command::Solve(a) => commands::solve_cmd(g, a),
        Command::Cluster(a) => commands::cluster_cmd(g, a),
        Command::Evaluate(a) => commands::evaluate_cmd(g, a),
        Command::Sweep(a) => {
            let report = sweep::run_sweep(&g.out, a, g.seed, g.threads.map(usize::from), !g.no_timing)?;
            println!(
                "{} trials run, {} resumed, sweep {}",
                report.new_trials,
                report.resumed_trials,
                if report.complete { "complete" } else { "incomplete" }
            );
            Ok(())
        }
    }
}
