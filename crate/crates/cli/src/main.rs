use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(moire_bands::run_cli(std::env::args_os()))
}
