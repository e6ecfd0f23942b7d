fn main() {
    std::process::exit(massshell::cli::main_with_args(std::env::args_os()));
}
