fn main() -> std::process::ExitCode {
    finpop::cli::main()
}
