fn main() {
    std::process::exit(inamp::cli::run(std::env::args_os()));
}
