fn main() {
    std::process::exit(verdoorn::cli::run(std::env::args_os()));
}
