fn main() {
    std::process::exit(gradopt_cli::main_with_args(std::env::args_os()));
}
