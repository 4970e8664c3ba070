fn main() {
    std::process::exit(ebcredible::cli::run(std::env::args_os()));
}
