use clap::Parser;

fn main() {
    let cli = lqpc::cli::Cli::parse();
    std::process::exit(lqpc::cli::run(&cli));
}
