fn main() {
    std::process::exit(caption_forge::cli::run(std::env::args_os()));
}
