fn main() {
    std::process::exit(picatom::cli::run_cli(std::env::args_os()));
}
