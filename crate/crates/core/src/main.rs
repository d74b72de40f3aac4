fn main() {
    std::process::exit(chaosmask::cli::cli_main(std::env::args_os()));
}
