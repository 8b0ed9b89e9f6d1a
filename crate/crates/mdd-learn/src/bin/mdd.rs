fn main() {
    std::process::exit(mdd_learn::cli::main_entry());
}
