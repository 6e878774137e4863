use clap::Parser;
use invscore_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("INVSCORE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("invscore {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
