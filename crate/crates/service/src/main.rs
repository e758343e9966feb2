fn main() {
    std::process::exit(crowdgate::cli::run(std::env::args_os()));
}
