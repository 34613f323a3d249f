fn main() {
    std::process::exit(hsic_minimax::cli::run(std::env::args_os()));
}
