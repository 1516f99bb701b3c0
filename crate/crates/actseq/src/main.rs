fn main() {
    std::process::exit(actseq::cli::main_entry());
}
