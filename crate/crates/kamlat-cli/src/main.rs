fn main() {
    std::process::exit(kamlat_cli::main_with(std::env::args_os()));
}
