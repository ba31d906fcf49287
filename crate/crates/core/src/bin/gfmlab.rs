fn main() {
    std::process::exit(gfmlab::cli::run_cli(std::env::args_os()));
}
