use clap::Parser;
use glvortex::cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run_cli(&cli) {
        eprintln!("glvortex {}: {e}", cli.command.name());
        std::process::exit(1);
    }
}
