fn main() {
    std::process::exit(flydram_cli::dispatch(std::env::args_os()));
}
