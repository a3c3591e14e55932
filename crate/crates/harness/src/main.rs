fn main() {
    std::process::exit(eve_harness::cli::run(std::env::args_os()));
}
