use std::io;
use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = panic::catch_unwind(|| {
        let (stdout, stderr) = (io::stdout(), io::stderr());
        cogcore::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
    })
    .unwrap_or(2);
    ExitCode::from(code as u8)
}
