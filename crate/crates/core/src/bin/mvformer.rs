fn main() {
    std::process::exit(mvformer::cli::main());
}
