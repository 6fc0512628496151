fn main() {
    std::process::exit(cvcluster::cli::run());
}
