use std::process::ExitCode;

use clap::Parser;
use reluflow::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = cli.resolve().and_then(|cfg| reluflow::execute(&cfg, threads));
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
