fn main() {
    std::process::exit(rieszflow::cli::main_with_args(std::env::args_os()));
}
