fn main() {
    std::process::exit(bornforge_cli::main_with_args(std::env::args_os()));
}
