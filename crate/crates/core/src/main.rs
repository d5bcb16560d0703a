fn main() {
    std::process::exit(gmeasure::cli::run(std::env::args_os()));
}
