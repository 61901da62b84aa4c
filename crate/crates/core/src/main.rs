fn main() {
    std::process::exit(hjdescent::cli::run(std::env::args_os()));
}
