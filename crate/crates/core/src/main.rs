fn main() {
    std::process::exit(lambda_cqed::cli::run(std::env::args_os()));
}
