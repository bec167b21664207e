fn main() {
    env_logger::init();
    std::process::exit(projforget::cli::run(std::env::args_os()));
}
