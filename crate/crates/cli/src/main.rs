fn main() {
    std::process::exit(eb_fission_cli::run(std::env::args_os()));
}
