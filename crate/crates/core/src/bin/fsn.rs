fn main() {
    std::process::exit(fsn_core::cli::main_with_args(std::env::args_os()));
}
