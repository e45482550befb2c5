use clap::Parser;

fn main() {
    let cli = wsp_cli::Cli::parse();
    if let Err(e) = wsp_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
