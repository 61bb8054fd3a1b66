fn main() {
    std::process::exit(scalewise::cli::run(std::env::args_os()));
}
