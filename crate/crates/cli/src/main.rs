use std::process::ExitCode;

use codesign_cli::{parse_cli, run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn main() -> ExitCode {
    let inv = match parse_cli(std::env::args_os()) {
        Ok(inv) => inv,
        Err(e) if e.is_help => {
            print!("{}", e.message);
            return ExitCode::from(EXIT_OK as u8);
        }
        Err(e) => {
            eprintln!("{}", e.message.trim_end());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&inv, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
