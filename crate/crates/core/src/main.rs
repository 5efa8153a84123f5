fn main() {
    std::process::exit(sheetreg::cli::run(std::env::args_os()));
}
