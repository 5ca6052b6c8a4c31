fn main() {
    std::process::exit(vgembed_cli::cli_main(std::env::args_os()));
}
