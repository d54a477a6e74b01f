fn main() {
    std::process::exit(densdep::cli::run_from_args(std::env::args_os()));
}
