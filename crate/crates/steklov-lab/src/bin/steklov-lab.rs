fn main() {
    std::process::exit(steklov_lab::cli::main_with_args(std::env::args_os()));
}
