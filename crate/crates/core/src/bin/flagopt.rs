fn main() {
    std::process::exit(flagopt::cli::main_exit_code());
}
