fn main() {
    quotelag::init_logging();
    let code = std::panic::catch_unwind(|| quotelag::run(std::env::args_os())).unwrap_or(5);
    std::process::exit(code);
}
