fn main() {
    std::process::exit(whgrav::cli::run());
}
