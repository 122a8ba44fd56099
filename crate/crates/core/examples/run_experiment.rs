//! A small Monte Carlo sweep through the harness, printed as CSV.

use misscov::harness::{run_experiment, write_csv, ExperimentConfig, RunOptions, TrialLabel};

const CONFIG: &str = r#"
[experiment]
kind = "mcar_uniform"
n = 20
trials = 10
seed = 7
estimators = ["sample", "known_p", "unknown_p"]

[spectrum]
kind = "geometric"
erank = 3.0

[grid]
count = 4
min = 40
max = 800

[mcar_uniform]
p = [0.5]
"#;

fn main() -> misscov::error::Result<()> {
    let config: ExperimentConfig = CONFIG.parse()?;
    let result = run_experiment(&config, &RunOptions::default())?;
    let means: Vec<_> = result
        .records
        .into_iter()
        .filter(|r| r.trial == TrialLabel::Mean)
        .collect();
    write_csv(std::io::stdout().lock(), Some("mean rows only"), &means)
}
