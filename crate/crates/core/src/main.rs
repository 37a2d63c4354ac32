fn main() -> std::process::ExitCode {
    eitlin::cli::main()
}
