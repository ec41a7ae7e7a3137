fn main() {
    std::process::exit(traitgeo_cli::run(std::env::args_os()));
}
