fn main() {
    std::process::exit(ttaudit::cli::run(std::env::args_os()));
}
