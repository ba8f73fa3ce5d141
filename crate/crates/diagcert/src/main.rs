fn main() {
    std::process::exit(diagcert::cli::run_from(std::env::args_os()));
}
