fn main() -> std::process::ExitCode {
    explbench::cli::main()
}
