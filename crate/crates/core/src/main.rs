fn main() {
    std::process::exit(ringsim::cli::main_with_args(std::env::args_os()));
}
