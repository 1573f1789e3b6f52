fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(coning_kit::cli::run_cli(&argv));
}
