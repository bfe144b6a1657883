use clap::Parser;

fn main() {
    let cli = tclsim::cli::Cli::parse();
    if let Err(e) = tclsim::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
