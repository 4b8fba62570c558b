fn main() {
    std::process::exit(inspire_server::cli::main_with_args(std::env::args_os()));
}
