fn main() {
    std::process::exit(stalign::cli::run(std::env::args_os()));
}
