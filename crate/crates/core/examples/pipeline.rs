//! Full solve -> analyze -> cover -> report run into a temporary directory.

use optpart::pipeline::{run, RunConfig, Stage};

fn main() -> optpart::Result<()> {
    let dir = std::env::temp_dir().join("optpart-pipeline-example");
    let cfg = RunConfig {
        stages: vec![Stage::Solve, Stage::Analyze, Stage::Cover, Stage::Report],
        output: dir.clone(),
        seed: Some(7),
        ..Default::default()
    };
    let outcome = run(&cfg)?;
    if let Some(summary) = &outcome.summary {
        print!("{}", summary.to_text());
    }
    println!("artifacts in {}", dir.display());
    std::process::exit(outcome.exit_code());
}
