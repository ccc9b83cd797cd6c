fn main() {
    std::process::exit(fairtab::run_cli());
}
