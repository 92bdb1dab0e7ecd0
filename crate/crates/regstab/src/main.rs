fn main() {
    std::process::exit(regstab::cli::cli_main(std::env::args_os()));
}
