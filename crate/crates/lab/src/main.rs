use clap::Parser;

fn main() {
    let cli = noise_lab::Cli::parse();
    if let Err(e) = noise_lab::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
