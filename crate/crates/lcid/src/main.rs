fn main() {
    std::process::exit(lcid::cli::run(std::env::args_os()));
}
