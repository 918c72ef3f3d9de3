fn main() {
    std::process::exit(dtameta::run(std::env::args_os()));
}
