fn main() {
    std::process::exit(embdyn::cli::run(std::env::args_os()));
}
