use clap::Parser;

fn main() {
    let cli = stochcool_cli::Cli::parse();
    match stochcool_cli::run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
