fn main() {
    std::process::exit(rarl_cli::main_with_args(std::env::args_os()));
}
