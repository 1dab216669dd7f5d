use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use moral_compass::gateway::{repl, serve, Config};

/// Moral question answering: interactive console by default, HTTP
/// service with --serve.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Configuration file (flat `key = value` lines); defaults apply
    /// when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run the HTTP API on the configured listen address instead of
    /// the console.
    #[arg(long)]
    serve: bool,
}

fn run(args: &Args) -> moral_compass::Result<()> {
    let config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if args.serve {
        serve(&config)
    } else {
        repl::run_with_stdio(&config)
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
