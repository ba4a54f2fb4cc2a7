use clap::Parser;

use cvr_baseline::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", err.error_json());
        std::process::exit(err.exit_code());
    }
}
