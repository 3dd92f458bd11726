use clap::Parser;

fn main() {
    let cli = blockshuffle_cli::Cli::parse();
    if let Err(e) = blockshuffle_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
