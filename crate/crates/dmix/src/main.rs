use clap::Parser;

fn main() {
    let cli = dmix::Cli::parse();
    if let Err(e) = dmix::run(cli) {
        eprintln!("dmix: {e}");
        std::process::exit(e.exit_code());
    }
}
