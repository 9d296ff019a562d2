use clap::Parser;
use mtlab::cli::{init_threads, run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| run_cli(&cli)) {
        eprintln!("mtlab: {e}");
        std::process::exit(e.code());
    }
}
