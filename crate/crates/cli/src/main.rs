fn main() {
    std::process::exit(sevbench_cli::run(std::env::args_os()));
}
