use clap::Parser;
use gbs_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match gbs_cli::run(cli) {
        Ok(m) => log::info!("{} finished in {:.3} s (digest {})", m.command, m.seconds, m.digest),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
