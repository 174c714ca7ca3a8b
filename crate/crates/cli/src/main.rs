fn main() {
    std::process::exit(mobex::run_cli(std::env::args_os()));
}
