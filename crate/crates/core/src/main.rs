fn main() {
    std::process::exit(tdes::cli::run(std::env::args_os()));
}
