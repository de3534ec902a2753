fn main() {
    std::process::exit(basket_cli::cli::run(std::env::args_os()));
}
