fn main() {
    std::process::exit(gbx_cli::run(std::env::args_os()));
}
