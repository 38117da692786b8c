fn main() {
    std::process::exit(localizer_lab::cli::run(std::env::args_os()));
}
