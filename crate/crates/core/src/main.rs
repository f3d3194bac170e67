fn main() {
    std::process::exit(deepauto::cli::run(std::env::args_os()));
}
