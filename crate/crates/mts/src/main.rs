fn main() {
    std::process::exit(mts::cli::run(std::env::args_os()));
}
