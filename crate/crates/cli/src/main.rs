use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use parley::{run, Args, ErrorCode};

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": ErrorCode::Usage,
                    "exit": ErrorCode::Usage.exit_code(),
                    "detail": e.to_string().trim_end(),
                })
            );
            return ExitCode::from(ErrorCode::Usage.exit_code());
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(&args) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.code().exit_code())
        }
    }
}
