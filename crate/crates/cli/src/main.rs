fn main() {
    std::process::exit(dwstage_cli::run(std::env::args_os()));
}
