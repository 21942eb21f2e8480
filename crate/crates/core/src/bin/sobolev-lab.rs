fn main() {
    std::process::exit(sobolev_lab::cli::run(std::env::args_os()));
}
