fn main() {
    std::process::exit(scp_core::cli::run(std::env::args_os()));
}
