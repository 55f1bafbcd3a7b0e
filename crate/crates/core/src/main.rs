fn main() {
    std::process::exit(lrtdahl::cli::run(std::env::args_os()));
}
