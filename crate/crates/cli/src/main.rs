fn main() {
    std::process::exit(latentqgan_cli::run(std::env::args_os()));
}
