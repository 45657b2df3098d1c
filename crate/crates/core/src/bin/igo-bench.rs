fn main() {
    std::process::exit(igo_reuse::cli::run(std::env::args_os()));
}
