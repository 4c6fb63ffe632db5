use clap::Parser;

fn main() {
    let cli = prefmpc::cli::Cli::parse();
    if let Err(e) = prefmpc::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
