fn main() {
    std::process::exit(stefan_kpp::cli::main_with_args(std::env::args_os()));
}
