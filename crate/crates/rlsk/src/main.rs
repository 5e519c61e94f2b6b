fn main() {
    std::process::exit(rlsk::cli::dispatch(std::env::args_os()));
}
