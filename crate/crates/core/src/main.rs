fn main() {
    std::process::exit(chs::cli::run_cli(std::env::args_os()));
}
