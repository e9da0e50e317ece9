fn main() {
    std::process::exit(adagnn::cli::main_with_args(std::env::args_os()));
}
