fn main() {
    std::process::exit(ltgcd::harness::cli::run(std::env::args_os()));
}
