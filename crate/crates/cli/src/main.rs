fn main() {
    std::process::exit(ctms::run(std::env::args_os()));
}
