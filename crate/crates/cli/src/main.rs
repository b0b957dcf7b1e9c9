fn main() {
    std::process::exit(inr_shape_cli::run(std::env::args_os()));
}
