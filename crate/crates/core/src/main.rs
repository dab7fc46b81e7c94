use clap::Parser;

fn main() {
    let cli = infofair::cli::Cli::parse();
    std::process::exit(infofair::cli::run(&cli));
}
