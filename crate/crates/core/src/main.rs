fn main() {
    std::process::exit(coldcavity::cli::dispatch(std::env::args_os()));
}
