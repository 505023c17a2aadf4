use std::io::{self, IsTerminal};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let tty = stderr.is_terminal();
    let code = btq::cli::main_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock(), tty);
    ExitCode::from(code)
}
