use std::process::ExitCode;

fn main() -> ExitCode {
    fqcp::cli::main()
}
