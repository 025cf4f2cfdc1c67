fn main() {
    std::process::exit(hjstp::cli::run(std::env::args_os()));
}
