use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(teamcoach::cli::run(std::env::args_os()))
}
