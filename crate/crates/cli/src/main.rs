fn main() {
    std::process::exit(grazing_cli::run(std::env::args_os()));
}
