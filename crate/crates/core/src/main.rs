fn main() {
    std::process::exit(dpnls::cli::main_entry());
}
