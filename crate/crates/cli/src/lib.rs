//! Command-line pipeline and HTTP editing service around the `inr-shape`
//! library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod loaded;
pub mod payload;
pub mod plots;
pub mod server;

pub use error::{CliError, CliResult};

use clap::Parser;

/// Parses `argv`, runs the command and returns the process exit status.
/// Errors are printed to stderr as one JSON object.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            err.report();
            return err.exit_code();
        }
    };
    init_logging(cli.quiet);
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            e.report();
            e.exit_code()
        }
    }
}

fn init_logging(quiet: bool) {
    let default = if quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .target(env_logger::Target::Stderr)
        .try_init();
}
