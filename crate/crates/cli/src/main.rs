use clap::{Parser, Subcommand};
use std::process::ExitCode;
use ucpec::Error;

mod args;
mod compress;
mod keyrate;
mod selftest;

#[derive(Parser)]
#[command(name = "ucpec", version, about = "Universal classical-quantum compression and B92 key-rate tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error probability of hashed compression with a universal decoder.
    CompressSim(compress::CompressArgs),
    /// Finite-size B92 key rates over a (p, n_tot) grid.
    Keyrate(keyrate::KeyrateArgs),
    /// Asymptotic B92 key rates over a grid of depolarizing parameters.
    KeyrateAsymptotic(keyrate::AsymptoticArgs),
    /// Built-in consistency checks.
    Selftest(selftest::SelftestArgs),
}

const EXIT_USAGE: u8 = 64;
const EXIT_NUMERIC: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Domain(_) => EXIT_USAGE,
        Error::Capacity(_) => EXIT_CAPACITY,
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::CompressSim(a) => compress::cmd_compress_sim(a).map(|_| true),
        Command::Keyrate(a) => keyrate::cmd_keyrate(a).map(|_| true),
        Command::KeyrateAsymptotic(a) => keyrate::cmd_keyrate_asymptotic(a).map(|_| true),
        Command::Selftest(a) => selftest::cmd_selftest(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERIC),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
