fn main() {
    std::process::exit(hse_core::cli::main_with_args(std::env::args_os()));
}
