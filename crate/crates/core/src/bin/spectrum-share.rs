fn main() {
    std::process::exit(shared_spectrum::harness::cli::run(std::env::args_os()));
}
