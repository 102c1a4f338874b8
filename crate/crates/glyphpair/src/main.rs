fn main() {
    std::process::exit(glyphpair::cli::run(std::env::args_os()));
}
