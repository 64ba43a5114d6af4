use std::io;

use clap::Parser;
use slicebench::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let code = execute(&cli, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
