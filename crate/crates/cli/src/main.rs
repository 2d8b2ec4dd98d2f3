use clap::Parser;

fn main() {
    let cli = fracdelaunay_cli::Cli::parse();
    std::process::exit(fracdelaunay_cli::run(&cli));
}
