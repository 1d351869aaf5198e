fn main() {
    std::process::exit(mmtsm::cli::run_cli(std::env::args_os()));
}
