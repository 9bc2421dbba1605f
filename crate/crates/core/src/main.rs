fn main() {
    std::process::exit(gridless_doa::cli::dispatch(std::env::args_os()));
}
