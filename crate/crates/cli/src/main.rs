fn main() {
    std::process::exit(afford_cli::cli::run(std::env::args_os()));
}
