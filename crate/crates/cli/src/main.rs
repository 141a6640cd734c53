use clap::Parser;
use qsplab_cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| run(&cli));
    match result {
        Ok((_, written)) => {
            println!("{}", written.csv.display());
            println!("{}", written.json.display());
        }
        Err(e) => {
            eprintln!("qsplab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
