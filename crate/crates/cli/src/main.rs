fn main() {
    std::process::exit(neglearn_cli::run(std::env::args_os()));
}
