fn main() {
    std::process::exit(gridreconf::cli::run_cli(std::env::args()));
}
