fn main() {
    std::process::exit(streamforge::cli::main_with_args(std::env::args_os()));
}
