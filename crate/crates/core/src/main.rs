fn main() {
    std::process::exit(tcmax::cli::run(std::env::args_os()));
}
