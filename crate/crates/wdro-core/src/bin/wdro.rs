fn main() {
    std::process::exit(wdro_core::cli::run(std::env::args_os()));
}
