fn main() {
    std::process::exit(prevalidation::cli::main());
}
