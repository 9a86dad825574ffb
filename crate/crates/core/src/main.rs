use clap::Parser;

use stkde::cli::{self, Cli};

fn main() {
    let cli = Cli::parse();
    match cli::dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
