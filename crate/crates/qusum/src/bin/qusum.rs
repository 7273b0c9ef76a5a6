fn main() {
    std::process::exit(qusum::cli::run());
}
