use clap::Parser;
use poisonviz::cli::{self, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => err.exit(), // clap exits 2 on usage errors, 0 on --help
    };
    if let Err(err) = cli::run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
