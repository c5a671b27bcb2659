fn main() {
    std::process::exit(stylevar::harness::cli::main(std::env::args_os()));
}
