fn main() {
    std::process::exit(promptmap_cli::run(std::env::args_os()));
}
