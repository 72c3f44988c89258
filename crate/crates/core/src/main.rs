fn main() {
    std::process::exit(xaidroid::cli::run(std::env::args_os()));
}
