fn main() {
    std::process::exit(ncreal::cli::run());
}
