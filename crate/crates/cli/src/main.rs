fn main() {
    std::process::exit(bct_cli::run_command(std::env::args_os()));
}
