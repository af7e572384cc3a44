fn main() {
    std::process::exit(qgw::cli::run(std::env::args_os()));
}
