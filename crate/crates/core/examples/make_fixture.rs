//! Regenerates the shipped fixture directory.
//!
//! cargo run --example make_fixture -- crates/core/fixtures

use std::path::Path;

use explbench::synth::Fixture;

pub fn run(dir: &Path) -> anyhow::Result<String> {
    let fixture = Fixture::standard();
    fixture.write(dir)?;
    Ok(format!(
        "{} facts, {} questions, {} ratings, {} score files -> {}",
        fixture.kb.len(),
        fixture.questions.len(),
        fixture.ratings.len(),
        fixture.scores.len(),
        dir.display()
    ))
}

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    println!("{}", run(Path::new(&dir))?);
    Ok(())
}
