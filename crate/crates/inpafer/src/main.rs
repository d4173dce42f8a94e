fn main() {
    std::process::exit(inpafer::cli::run(std::env::args_os()));
}
