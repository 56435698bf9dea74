fn main() {
    std::process::exit(ssm_core::cli::run(std::env::args_os()));
}
