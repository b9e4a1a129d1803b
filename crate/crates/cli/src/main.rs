use clap::Parser;
use mentalgen_cli::args::Cli;
use mentalgen_cli::CliError;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let json = argv.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 || !json => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", CliError::new("usage", first).to_json());
            std::process::exit(2);
        }
    };
    if let Err(e) = mentalgen_cli::run(&cli, &argv[1..]) {
        if cli.json {
            eprintln!("{}", e.to_json());
        } else {
            eprintln!("mentalgen: {e}");
        }
        std::process::exit(e.exit_code());
    }
}
