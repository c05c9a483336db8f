fn main() {
    std::process::exit(ah_ensemble::cli::run(std::env::args_os()));
}
