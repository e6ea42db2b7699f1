fn main() {
    std::process::exit(motorclass::cli::run(std::env::args_os()));
}
