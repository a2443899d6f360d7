fn main() {
    std::process::exit(crashmod::cli::dispatch(std::env::args_os()));
}
