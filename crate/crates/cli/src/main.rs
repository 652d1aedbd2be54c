fn main() {
    std::process::exit(canopy_cli::app::run(std::env::args_os()));
}
