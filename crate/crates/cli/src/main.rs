use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use partrans_cli::commands::{execute, write_atomic, Cli};

fn main() -> ExitCode {
    let (code, text, output) = execute(Cli::parse());
    match output {
        Some(file) => {
            if let Err(e) = write_atomic(&file, &text) {
                eprintln!("partrans: cannot write {}: {e}", file.display());
                return ExitCode::from(2);
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::from(code as u8)
}
