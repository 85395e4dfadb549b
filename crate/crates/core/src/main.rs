fn main() {
    std::process::exit(pairtrack::cli::run(std::env::args_os()));
}
