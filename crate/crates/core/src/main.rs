fn main() {
    std::process::exit(transmodality::cli::main_with_args(std::env::args_os()));
}
