fn main() {
    std::process::exit(ssvep_cli::run(std::env::args_os()));
}
