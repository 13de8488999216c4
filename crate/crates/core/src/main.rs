fn main() {
    std::process::exit(dirdepth::cli::run(std::env::args_os()));
}
