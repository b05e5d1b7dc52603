fn main() -> std::process::ExitCode {
    minijava::cli::main_with_args(std::env::args())
}
