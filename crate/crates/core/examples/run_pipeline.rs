//! Runs the whole command-line pipeline on the fixture into a scratch
//! directory and prints the combined report.

use std::path::{Path, PathBuf};

use clap::Parser;
use explbench::cli::{run as run_cli, Cli};

pub fn run(fixtures: &Path, out: &Path) -> anyhow::Result<String> {
    let config = fixtures.join("config.toml");
    let args = ["explbench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "pipeline"];
    run_cli(Cli::try_parse_from(args)?)?;
    Ok(std::fs::read_to_string(out.join("report.txt"))?)
}

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    let out = tempfile::tempdir()?;
    print!("{}", run(&fixtures, out.path())?);
    Ok(())
}
