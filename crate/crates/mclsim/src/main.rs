fn main() {
    std::process::exit(mclsim::cli::run(std::env::args_os()));
}
