fn main() {
    std::process::exit(gaussdecay_cli::run_cli(std::env::args_os()));
}
