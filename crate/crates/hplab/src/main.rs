fn main() {
    std::process::exit(hplab::cli::run());
}
