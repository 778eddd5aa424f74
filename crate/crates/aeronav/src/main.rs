fn main() {
    std::process::exit(aeronav::cli::run());
}
