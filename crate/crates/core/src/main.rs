use clap::Parser;
use condsqueeze::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
