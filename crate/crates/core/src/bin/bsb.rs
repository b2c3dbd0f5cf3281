fn main() {
    std::process::exit(bsb_core::cli::dispatch(std::env::args_os()));
}
