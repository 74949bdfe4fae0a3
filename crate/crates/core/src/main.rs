fn main() {
    std::process::exit(burst_sampling::cli::main());
}
