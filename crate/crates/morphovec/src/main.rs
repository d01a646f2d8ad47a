fn main() {
    std::process::exit(morphovec::cli::run(std::env::args_os()));
}
