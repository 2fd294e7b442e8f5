mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .is_err()
        {
            eprintln!("error: invalid thread count {t}");
            std::process::exit(commands::EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Check(a) => commands::check(a, cli.gnuplot_hint),
        Command::Pvi(a) => commands::pvi(a, cli.gnuplot_hint),
        Command::Table(a) => commands::table(a, cli.gnuplot_hint),
        Command::List(a) => commands::list(a),
    };
    let code = match result {
        Ok(code) => code,
        Err(commands::Failure::BrokenPipe) => commands::EXIT_PASS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
