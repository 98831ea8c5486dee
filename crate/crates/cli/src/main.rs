use clap::Parser;

fn main() {
    let cli = mtfs_cli::Cli::parse();
    if let Err(err) = mtfs_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(mtfs_cli::exit_code(&err));
    }
}
