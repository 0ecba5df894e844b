use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use shuffled_sgd_cli::{execute, init_threads, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| execute(&cli, &mut io::stdout().lock(), &mut io::stderr().lock()));
    match result {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
