use clap::Parser;
use narrative_cli::cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NARRATIVE_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = narrative_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
