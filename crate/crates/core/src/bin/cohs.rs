fn main() -> std::process::ExitCode {
    cohs_cqg::cli::main()
}
