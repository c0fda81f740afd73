fn main() {
    std::process::exit(trustrec::cli::run_cli(std::env::args_os()));
}
