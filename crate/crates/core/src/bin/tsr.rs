fn main() {
    std::process::exit(tsr_core::cli::run(std::env::args_os()));
}
