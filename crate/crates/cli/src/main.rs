use clap::Parser;

fn main() {
    let cli = poperm_cli::Cli::parse();
    if let Err(e) = poperm_cli::run(cli) {
        eprintln!("poperm: {e}");
        std::process::exit(e.exit_code());
    }
}
