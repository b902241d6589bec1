fn main() {
    std::process::exit(graph_csh::cli::main_with_args(std::env::args_os()));
}
