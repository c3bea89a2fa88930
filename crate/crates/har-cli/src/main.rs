fn main() {
    std::process::exit(har_cli::cli::cli_main(std::env::args_os()));
}
