fn main() {
    std::process::exit(evgraph::cli::run(std::env::args_os()));
}
