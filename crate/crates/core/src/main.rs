fn main() {
    std::process::exit(pwlab::cli::run(std::env::args_os()));
}
