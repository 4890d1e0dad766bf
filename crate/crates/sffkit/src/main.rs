use clap::Parser;

use sffkit::cli::{self, Cli};

fn main() {
    let cli = Cli::parse();
    match cli::execute(cli) {
        Ok((text, code)) => {
            print!("{}", text);
            std::process::exit(code);
        }
        Err(err) => {
            eprintln!("error: {}", err);
            std::process::exit(cli::EXIT_USAGE);
        }
    }
}
