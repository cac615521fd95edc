fn main() -> std::process::ExitCode {
    rec_unlearn::cli::run()
}
