fn main() {
    std::process::exit(qpath::cli::run_command(std::env::args_os()));
}
