fn main() {
    std::process::exit(lrp_cli::run(std::env::args_os()));
}
