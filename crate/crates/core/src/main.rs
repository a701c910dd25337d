use std::io::{self, BufReader};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut input = BufReader::new(io::stdin());
    let mut output = io::stdout();
    let code = spacetok::cli::run_from_args(std::env::args_os(), &mut input, &mut output);
    std::process::exit(code);
}
