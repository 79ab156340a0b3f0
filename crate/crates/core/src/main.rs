fn main() {
    std::process::exit(umtlab::cli::main_with_args(std::env::args_os()));
}
