fn main() {
    std::process::exit(glc_core::cli::main_with_args(std::env::args_os()));
}
