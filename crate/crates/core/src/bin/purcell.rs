fn main() {
    std::process::exit(purcell::cli::run(std::env::args_os()));
}
