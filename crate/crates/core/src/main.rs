fn main() {
    std::process::exit(sep_ergo::cli::run(std::env::args_os()));
}
