use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut err = std::io::stderr();
    if let Err(e) = tonelli::cli::init_workers() {
        let _ = writeln!(err, "error: {e}");
        return ExitCode::from(tonelli::cli::EXIT_CONFIG as u8);
    }
    let mut out = std::io::stdout().lock();
    let code = tonelli::cli::run_from_args(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    ExitCode::from(code as u8)
}
