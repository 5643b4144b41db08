fn main() {
    std::process::exit(ibound_cli::run(std::env::args_os()));
}
