fn main() {
    std::process::exit(autothorax::cli::run(std::env::args_os()));
}
