fn main() {
    std::process::exit(snmc::cli::main());
}
