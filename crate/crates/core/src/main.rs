use clap::Parser;

fn main() {
    let cli = qglin::cli::Cli::parse();
    std::process::exit(qglin::cli::run(&cli));
}
