fn main() {
    std::process::exit(stochheat::cli::run(std::env::args_os()));
}
