use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use miadmm_cli::{init_logging, run_command, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    let cfg = cli.command.into_config();
    let code = run_command(&cfg, &mut std::io::stdout().lock());
    ExitCode::from(code as u8)
}
