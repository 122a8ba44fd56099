use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use misscov::diagnostics::BoundConstants;
use misscov::error::{Error, Result};
use misscov::harness::{
    calibrate_constants, emit_plot_data, read_csv_file, run_experiment, verify_audit,
    write_csv_file, ExperimentConfig, Preset, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "misscov",
    version,
    about = "Covariance estimation with missing data: Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSV.
    Run {
        config: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["paper", "desk"])]
        preset: Option<String>,
        /// Overrides `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Snapshot ~1% of the estimates and re-check their error column.
        #[arg(long)]
        audit: bool,
    },
    /// Write per-curve data files and a gnuplot script next to a CSV.
    Plot { csv: PathBuf },
    /// Print bound constants scaled to envelope the errors in a CSV.
    Calibrate { csv: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            preset,
            seed,
            threads,
            audit,
        } => run(&config, out, preset.as_deref(), seed, threads, audit),
        Command::Plot { csv } => plot(&csv),
        Command::Calibrate { csv } => calibrate(&csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(
    path: &Path,
    out: Option<PathBuf>,
    preset: Option<&str>,
    seed: Option<u64>,
    threads: Option<usize>,
    audit: bool,
) -> Result<()> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(p) = preset {
        config.apply_preset(p.parse::<Preset>()?);
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let result = run_experiment(&config, &RunOptions { threads, audit })?;
    let csv_path = out_dir.join(&config.output);
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let comment = format!(
        "misscov {} seed={} trials={} generated_unix={stamp}",
        config.name, config.seed, config.trials
    );
    write_csv_file(&csv_path, Some(&comment), &result.records)?;
    println!(
        "wrote {} rows to {}",
        result.records.len(),
        csv_path.display()
    );
    if let Some(log) = &result.audit {
        let audit_path = csv_path.with_extension("audit.json");
        let json = serde_json::to_string(log).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(&audit_path, json)?;
        let checked = verify_audit(log, &result.records)?;
        println!(
            "audit: {checked} snapshots verified, written to {}",
            audit_path.display()
        );
    }
    Ok(())
}

fn plot(csv: &Path) -> Result<()> {
    let records = read_csv_file(csv)?;
    let dir = csv
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let out = emit_plot_data(&records, dir, stem)?;
    println!(
        "wrote {} curves and {}",
        out.data_files.len(),
        out.script.display()
    );
    Ok(())
}

fn calibrate(csv: &Path) -> Result<()> {
    let records = read_csv_file(csv)?;
    let cal = calibrate_constants(&records, &BoundConstants::default())?;
    println!(
        "# {} reference points; scale c x{}, c_tilde x{}",
        cal.points, cal.scale_c, cal.scale_c_tilde
    );
    println!("[bounds]");
    println!("c = {:?}", cal.constants.c);
    println!("c_tilde = {:?}", cal.constants.c_tilde);
    println!("c1 = {:?}", cal.constants.c1);
    println!("c2 = {:?}", cal.constants.c2);
    Ok(())
}
