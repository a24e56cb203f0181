fn main() {
    std::process::exit(mediatopic::cli::main());
}
