fn main() {
    std::process::exit(unirate::cli::main_with(std::env::args_os()));
}
