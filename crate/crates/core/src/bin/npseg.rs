fn main() {
    std::process::exit(npseg::cli::run(std::env::args_os()));
}
