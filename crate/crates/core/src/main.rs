fn main() {
    std::process::exit(pcosync::cli::main());
}
