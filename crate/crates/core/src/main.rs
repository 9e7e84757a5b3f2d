fn main() {
    std::process::exit(toffoli_distill::cli::run(std::env::args_os()));
}
