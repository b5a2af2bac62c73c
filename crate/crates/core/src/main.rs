fn main() -> std::process::ExitCode {
    kgrecon::cli::main()
}
