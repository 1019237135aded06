fn main() {
    std::process::exit(chiral_meta::cli::run(std::env::args_os()));
}
