fn main() {
    std::process::exit(jetmech::cli::main_with(std::env::args_os()));
}
