fn main() {
    std::process::exit(dpnn_cli::run(std::env::args_os()));
}
