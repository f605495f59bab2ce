//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use crate::commands::{
    certify_cmd, formation_cmd, sos_check_cmd, verify_cmd, CertifyArgs, FormationCommand,
    SosCheckArgs, Tolerances, VerifyArgs, EXIT_OK, EXIT_USAGE,
};

/// Sum-of-squares and Positivstellensatz certificates for formation control.
///
/// Exit status: 0 found or feasible, 2 not found, 64 bad input, 70 internal
/// failure.
#[derive(Parser, Debug)]
#[command(name = "formsos", version)]
pub struct Cli {
    #[command(flatten)]
    pub tol: Tolerances,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether one polynomial is a sum of squares.
    SosCheck(SosCheckArgs),
    /// Search for a Positivstellensatz refutation of a problem file.
    Certify(CertifyArgs),
    /// Check a certificate file in exact arithmetic.
    Verify(VerifyArgs),
    /// Formation sets, simulation and classification.
    #[command(subcommand)]
    Formation(FormationCommand),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::SosCheck(a) => sos_check_cmd(a, &cli.tol, out),
        Command::Certify(a) => certify_cmd(a, &cli.tol, out, err),
        Command::Verify(a) => verify_cmd(a, out),
        Command::Formation(c) => formation_cmd(c, &cli.tol, out, err),
    };
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
