use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use umbra::{run, thread_limit, Cli, Exit, Format};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage.code() } else { 0 });
        }
    };
    match thread_limit(std::env::var("UMBRA_THREADS").ok().as_deref()) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("umbra: {e}");
                return ExitCode::from(Exit::Numeric.code());
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("umbra: {msg}");
            return ExitCode::from(Exit::Usage.code());
        }
    }
    let report = run(&cli.command);
    let text = match cli.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
    };
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    if let Some(e) = &report.error {
        eprintln!("umbra: {e}");
    }
    ExitCode::from(report.exit_code.code())
}
