fn main() {
    std::process::exit(parsimony::cli::main_with_args(std::env::args_os()));
}
