fn main() {
    std::process::exit(polymer_lab::cli::run(std::env::args_os()));
}
