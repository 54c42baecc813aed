fn main() {
    std::process::exit(rexdesign_cli::run(std::env::args_os()));
}
