fn main() {
    std::process::exit(dfcm_cli::main_with_args(std::env::args_os()));
}
