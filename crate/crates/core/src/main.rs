fn main() {
    std::process::exit(ccp_core::cli::main_with_args(std::env::args_os()));
}
