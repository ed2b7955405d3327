use clap::Parser;

fn main() {
    let cli = negspan::cli::Cli::parse();
    if let Err(e) = negspan::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
