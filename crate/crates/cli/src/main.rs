fn main() -> std::process::ExitCode {
    tmatch_cli::cli::run(std::env::args_os())
}
