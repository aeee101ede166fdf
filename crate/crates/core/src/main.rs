fn main() {
    std::process::exit(moses_core::cli::run(std::env::args_os()));
}
