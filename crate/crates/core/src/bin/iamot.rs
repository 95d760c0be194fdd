use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use iamot::config::Config;
use iamot::eval::evaluate;
use iamot::io::{load_detections, read_results, write_results};
use iamot::overlay::write_overlays;
use iamot::pipeline;
use iamot::synth::ScenarioSpec;

#[derive(Parser)]
#[command(name = "iamot", version, about = "Multi-object tracking and segmentation over precomputed detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one or more detection files; writes `<name>.txt` per sequence
    /// and the effective configuration as `config.txt`.
    Track {
        #[arg(required = true)]
        detections: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Disable short-term retrieval of lost tracks.
        #[arg(long)]
        no_str: bool,
        /// Disable tracklet re-identification.
        #[arg(long)]
        no_reid: bool,
    },
    /// Print MOTS metrics of a result file against ground truth.
    Eval { results: PathBuf, ground_truth: PathBuf },
    /// Generate `detections.jsonl` and `gt.txt` from a scenario file.
    Synth {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render every frame of a result file as a PPM image.
    Overlay {
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn track(detections: &[PathBuf], config: Option<&PathBuf>, out: &PathBuf, no_str: bool, no_reid: bool) -> Result<()> {
    let mut cfg = match config {
        Some(path) => Config::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Config::default(),
    };
    if no_str {
        cfg.tracker.enable_str = false;
    }
    if no_reid {
        cfg.reid.enabled = false;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.echo()).context("writing config echo")?;
    for path in detections {
        let set = load_detections(path).with_context(|| format!("loading {}", path.display()))?;
        let result = pipeline::run(&set, &cfg).with_context(|| format!("tracking {}", path.display()))?;
        let dest = out.join(format!("{}.txt", set.meta.name));
        write_results(&result.records, &dest)?;
        println!("{}: {} frames, {} tracks -> {}", set.meta.name, set.frames.len(), result.tracklets.len(), dest.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Track { detections, config, out, no_str, no_reid } => track(&detections, config.as_ref(), &out, no_str, no_reid)?,
        Command::Eval { results, ground_truth } => {
            let hyp = read_results(&results).with_context(|| format!("reading {}", results.display()))?;
            let gt = read_results(&ground_truth).with_context(|| format!("reading {}", ground_truth.display()))?;
            print!("{}", evaluate(&hyp, &gt)?);
        }
        Command::Synth { scenario, out } => {
            let text = fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let generated = ScenarioSpec::from_json(&text)?.generate()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            generated.write(&out)?;
            println!("{} detections, {} ground-truth masks -> {}", generated.detections.detection_count(), generated.ground_truth.len(), out.display());
        }
        Command::Overlay { results, out } => {
            let records = read_results(&results).with_context(|| format!("reading {}", results.display()))?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let written = write_overlays(&records, &out)?;
            println!("{} frames -> {}", written.len(), out.display());
        }
    }
    Ok(())
}
