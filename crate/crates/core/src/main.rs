use std::process::ExitCode;

use clap::Parser;
use hat_afem::cli::{exit_code, run, write_lloyd_demo, Cli, Command, RunConfig};

fn init_logging() {
    let level = match std::env::var("HAT_AFEM_LOG").as_deref() {
        Ok("quiet") => "off",
        Ok("debug") => "debug",
        Ok("info") => "info",
        _ => "warn",
    };
    env_logger::Builder::new().parse_filters(level).init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::LloydDemo { points, iters, seed, out }) => write_lloyd_demo(points, iters, seed, &out).map(|_| 0),
        None => run(&RunConfig::from(cli.run)).map(|h| exit_code(&h)),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
