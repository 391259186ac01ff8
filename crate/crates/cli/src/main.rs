fn main() {
    std::process::exit(fairpol_cli::run(std::env::args_os()));
}
