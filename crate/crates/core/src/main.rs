fn main() {
    std::process::exit(privroute::cli::main());
}
