fn main() {
    std::process::exit(miae_cli::run(std::env::args_os()));
}
