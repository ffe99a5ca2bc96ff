fn main() {
    std::process::exit(fisher_mean::cli::main_with_args(std::env::args_os()));
}
