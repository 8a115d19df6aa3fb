fn main() {
    std::process::exit(xds_core::cli::main());
}
