use std::process::ExitCode;

fn main() -> ExitCode {
    darkstate_sim::cli::run()
}
