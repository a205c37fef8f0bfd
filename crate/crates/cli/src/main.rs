fn main() {
    std::process::exit(rumdp_cli::run(std::env::args_os()));
}
