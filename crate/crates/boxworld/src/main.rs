fn main() {
    std::process::exit(boxworld::cli::run(std::env::args()));
}
