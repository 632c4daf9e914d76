fn main() {
    std::process::exit(capmeasure::cli::run());
}
