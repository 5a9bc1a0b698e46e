use clap::Parser;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    losmimo_sim::cli::run(losmimo_sim::cli::Cli::parse())
}
