fn main() {
    std::process::exit(lmm_core::cli::run_cli(std::env::args()));
}
