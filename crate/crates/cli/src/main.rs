use clap::Parser;

fn main() {
    let cli = infogeo_cli::Cli::parse();
    if let Err(e) = infogeo_cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code);
    }
}
