fn main() -> std::process::ExitCode {
    nilmkit::cli::main()
}
