use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use prederr_cli::{run, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            let _ = std::io::stdout().flush();
            if !cli.quiet && !out.summary.is_empty() {
                eprintln!("{}", out.summary);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
