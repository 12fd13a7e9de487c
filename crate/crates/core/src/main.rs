fn main() {
    std::process::exit(ddmech::cli::cli_main(std::env::args_os()));
}
