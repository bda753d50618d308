use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(oneshot_qcap::cli::main_with(std::env::args_os()))
}
