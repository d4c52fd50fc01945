use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = reviewboard_cli::Cli::parse();
    let mut stdout = std::io::stdout();
    match reviewboard_cli::run(cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("reviewboard: {e:#}");
            ExitCode::FAILURE
        }
    }
}
