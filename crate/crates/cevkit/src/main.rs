use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CEVKIT_LOG", "warn")).init();
    let cli = cevkit::cli::Cli::parse();
    if let Err(e) = cevkit::cli::run(&cli) {
        eprintln!("cevkit: {e}");
        std::process::exit(e.exit_code());
    }
}
