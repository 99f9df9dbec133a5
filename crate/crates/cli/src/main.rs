fn main() {
    std::process::exit(sps_cli::main_with_args(std::env::args_os()));
}
