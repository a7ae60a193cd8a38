fn main() {
    std::process::exit(funcreg::cli::run(std::env::args_os()));
}
