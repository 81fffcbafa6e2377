fn main() {
    std::process::exit(hiernav::cli::main());
}
