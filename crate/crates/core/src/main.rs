fn main() {
    std::process::exit(nestfit::cli::run(std::env::args_os()));
}
