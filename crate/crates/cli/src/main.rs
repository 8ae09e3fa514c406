fn main() {
    std::process::exit(multistop_cli::main_with(std::env::args_os()));
}
