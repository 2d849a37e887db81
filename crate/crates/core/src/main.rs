fn main() {
    std::process::exit(wakepod::cli::run(std::env::args_os()));
}
