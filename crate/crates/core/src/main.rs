use clap::Parser;

use drtune::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        if let drtune::Error::Engine { stderr, .. } = &e {
            if !stderr.trim().is_empty() {
                eprintln!("engine stderr:\n{}", stderr.trim_end());
            }
        }
        if let drtune::Error::Trial { source, .. } = &e {
            if let drtune::Error::Engine { stderr, .. } = source.as_ref() {
                if !stderr.trim().is_empty() {
                    eprintln!("engine stderr:\n{}", stderr.trim_end());
                }
            }
        }
        std::process::exit(e.exit_code());
    }
}
