fn main() {
    std::process::exit(cavity_bundles::cli::run());
}
