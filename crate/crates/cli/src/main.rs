fn main() {
    std::process::exit(search::run(std::env::args_os()));
}
