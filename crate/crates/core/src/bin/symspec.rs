fn main() {
    std::process::exit(symspec::cli::main_from_env());
}
