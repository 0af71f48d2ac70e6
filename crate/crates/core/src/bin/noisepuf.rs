use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(noisepuf::cli::main(std::env::args_os()))
}
