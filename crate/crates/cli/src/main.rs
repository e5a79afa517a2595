fn main() {
    std::process::exit(cosetica::cli::main_with(std::env::args_os()));
}
