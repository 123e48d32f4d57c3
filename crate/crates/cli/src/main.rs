use clap::Parser;
use rydion_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{}", e.diagnostic());
        std::process::exit(e.exit_code);
    }
}
