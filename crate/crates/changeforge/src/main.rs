fn main() {
    std::process::exit(changeforge::cli::run(std::env::args_os()));
}
