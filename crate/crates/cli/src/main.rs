use std::process::ExitCode;

use clap::Parser;
use ergodic_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.resolve_config().and_then(|cfg| run(&cli.command, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
