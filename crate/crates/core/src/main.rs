fn main() {
    std::process::exit(loewner_lab::cli::main_with_args(std::env::args_os()));
}
