fn main() {
    std::process::exit(gelfand::cli::main_with_args(std::env::args_os()));
}
