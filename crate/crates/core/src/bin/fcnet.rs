fn main() {
    std::process::exit(fcnet::cli::main_with(std::env::args_os()));
}
