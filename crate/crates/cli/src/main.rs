use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod commands;

use commands::{Cli, Outcome};

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("EXSPARSE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("EXSPARSE_THREADS must be a positive integer (got '{raw}')"))?;
    if n == 0 {
        anyhow::bail!("EXSPARSE_THREADS must be a positive integer (got '{raw}')");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let run = init_threads().and_then(|_| commands::run(cli));
    match run {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
