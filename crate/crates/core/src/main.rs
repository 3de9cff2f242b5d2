fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(hermlab::cli::run_subcommand(&args));
}
