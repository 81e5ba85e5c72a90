fn main() {
    env_logger::init();
    std::process::exit(carma_levy::cli::run(std::env::args_os()));
}
