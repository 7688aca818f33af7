fn main() {
    std::process::exit(perclab::harness::cli_dispatch(std::env::args_os()));
}
