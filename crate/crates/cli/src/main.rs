//! `rfm-goe`: simulate the ribosome flow model under periodic rates, locate
//! the entrained orbit and test it for a gain of entrainment.
//!
//! Exit status: 0 success, 1 usage error, 2 invalid input, 3 numerical
//! failure, 4 a reproduction outside its tolerance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfm_goe::analysis::Condition;

mod artifacts;
mod commands;
mod error;
mod reproduce;

#[derive(Parser, Debug)]
#[command(
    name = "rfm-goe",
    version,
    about = "Gain-of-entrainment toolkit for the ribosome flow model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a scenario and write the trajectory with the running
    /// integral of the output.
    Simulate(SimulateArgs),
    /// Print the constant-rate equilibrium `e` and production rate `R_C` as JSON.
    Equilibrium(EquilibriumArgs),
    /// Locate the periodic orbit, write it and print closure statistics.
    Orbit(OrbitArgs),
    /// Compare the orbit's mean production rate with `R_C` and check the
    /// structural no-gain conditions.
    Goe(GoeArgs),
    /// Run the gain analysis over many scenarios and write one table.
    Batch(BatchArgs),
    /// Rerun a bundled reference example and compare with the published values.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Overrides of the numerics stored in a scenario file.
#[derive(Args, Debug, Default, Clone)]
pub struct Numerics {
    /// RK4 steps (and orbit samples) per period [default: the scenario's grid_M, 4096]
    #[arg(long, value_name = "M")]
    pub samples: Option<usize>,
    /// Period-map convergence tolerance [default: the scenario's orbit_tol, 1e-10]
    #[arg(long, value_name = "FLOAT")]
    pub tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Length of the run in periods
    #[arg(long, default_value_t = 10.0)]
    pub periods: f64,
    /// Initial state, comma separated [default: the scenario's x0, else the equilibrium]
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// Keep every N-th sample
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub stride: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[command(flatten)]
    pub numerics: Numerics,
}

#[derive(Args, Debug)]
pub struct EquilibriumArgs {
    #[arg(long, value_name = "PATH", conflicts_with = "means")]
    pub scenario: Option<PathBuf>,
    /// Mean rates u_0..u_n, comma separated
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub means: Option<String>,
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[command(flatten)]
    pub numerics: Numerics,
}

#[derive(Args, Debug)]
pub struct GoeArgs {
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Also write `<id>_goe.json` into this directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub numerics: Numerics,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    /// Scenario file or directory of `*.json` files; repeatable
    #[arg(long, value_name = "PATH", conflicts_with = "random")]
    pub scenario: Vec<PathBuf>,
    /// Generate COUNT seeded random scenarios instead of reading files
    #[arg(long, value_name = "COUNT")]
    pub random: Option<usize>,
    /// Number of sites for random scenarios
    #[arg(long, default_value_t = 4, requires = "random")]
    pub n: usize,
    /// Impose the structure of a no-gain condition (I..VI) on random scenarios
    #[arg(long, requires = "random")]
    pub condition: Option<Condition>,
    /// Seed of the first random scenario; scenario i uses seed + i
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: number of scenarios capped at logical cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[command(flatten)]
    pub numerics: Numerics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Example {
    /// Scalar tanh demo: equilibrium 0.8047 and orbit mean 0.8127
    Example1,
    /// Three-site RFM: orbit point, R_P, e_3 and R_C
    #[value(name = "example2-3")]
    Example2_3,
    /// Four-site random batch: R_P < R_C and sign changes of z_4
    Example5,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub example: Example,
    /// Write the figure data as CSV into this directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Equilibrium(a) => commands::equilibrium(a),
        Command::Orbit(a) => commands::orbit(a),
        Command::Goe(a) => commands::goe(a),
        Command::Batch(a) => commands::batch(a),
        Command::Reproduce(a) => reproduce::reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn condition_and_example_names() {
        let cli = Cli::try_parse_from(["rfm-goe", "batch", "--random", "3", "--condition", "iv"])
            .unwrap();
        let Command::Batch(b) = cli.command else {
            panic!()
        };
        assert_eq!(b.condition, Some(Condition::IV));
        let cli = Cli::try_parse_from(["rfm-goe", "reproduce", "example2-3"]).unwrap();
        let Command::Reproduce(r) = cli.command else {
            panic!()
        };
        assert_eq!(r.example, Example::Example2_3);
        assert!(Cli::try_parse_from(["rfm-goe", "batch", "--condition", "I"]).is_err());
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(
            CliError::Usage(String::new()).exit_code(),
            ExitCode::from(1)
        );
    }
}
