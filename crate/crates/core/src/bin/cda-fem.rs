fn main() {
    std::process::exit(cda_fem::cli::main());
}
