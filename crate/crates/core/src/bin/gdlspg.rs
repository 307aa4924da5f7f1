fn main() {
    std::process::exit(gdlspg::cli::cli(std::env::args_os()));
}
