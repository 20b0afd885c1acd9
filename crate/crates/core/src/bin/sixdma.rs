use std::process::ExitCode;

fn main() -> ExitCode {
    sixdma::cli::main_with_args(std::env::args_os())
}
