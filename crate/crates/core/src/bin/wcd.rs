fn main() {
    std::process::exit(wcd::cli::run(std::env::args_os()));
}
