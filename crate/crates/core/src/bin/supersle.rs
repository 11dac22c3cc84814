fn main() {
    std::process::exit(supersle::cli::run(std::env::args_os()));
}
