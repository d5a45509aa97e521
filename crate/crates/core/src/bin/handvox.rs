fn main() {
    std::process::exit(handvox::cli::run(std::env::args_os()));
}
