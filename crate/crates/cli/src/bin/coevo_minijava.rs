//! The bundled Java-subset toolchain, installed next to `coevo` for adapters to call.

fn main() -> std::process::ExitCode {
    minijava::cli::main_with_args(std::env::args())
}
