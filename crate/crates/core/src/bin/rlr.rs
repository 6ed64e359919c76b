use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = rlr::cli::run(rlr::cli::Cli::parse()) {
        eprintln!("{}", rlr::cli::error_line(&e));
        std::process::exit(1);
    }
}
