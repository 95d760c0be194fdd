//! End-to-end run over one sequence: detection filters, online tracking,
//! re-identification, track pruning and deduplication.

use thiserror::Error;

use crate::config::Config;
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::io::{records_from_tracklets, DetectionSet, IoError, ResultRecord};
use crate::postfilter::{dedup_tracks, filter_detections, prune_tracks};
use crate::reid::{merge_pass, Tracklet};
use crate::synth::{ScenarioSpec, SynthError};
use crate::tracker::{Tracker, TrackerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Tracks as they left the online tracker.
    pub raw_track_count: usize,
    /// Tracks after re-identification, before pruning.
    pub merged_track_count: usize,
    pub tracklets: Vec<Tracklet>,
    pub records: Vec<ResultRecord>,
}

/// Configuration with the sequence's frame rate and camera mode filled in.
pub fn effective_config(cfg: &Config, set: &DetectionSet) -> Config {
    let mut cfg = cfg.clone();
    cfg.tracker.fps = set.meta.fps;
    cfg.reid.camera_mode = set.meta.camera_mode;
    cfg
}

pub fn run(set: &DetectionSet, cfg: &Config) -> Result<PipelineOutput, PipelineError> {
    let cfg = effective_config(cfg, set);
    let mut tracker = Tracker::new(cfg.tracker.clone())?;
    for (frame, dets) in &set.frames {
        tracker.step(*frame, filter_detections(dets.clone(), &cfg.filter))?;
    }
    let tracklets: Vec<Tracklet> = tracker.finish().into_iter().map(Tracklet::from_track).collect();
    let raw_track_count = tracklets.len();
    let tracklets = if cfg.reid.enabled { merge_pass(tracklets, &cfg.reid, &cfg.tracker) } else { tracklets };
    let merged_track_count = tracklets.len();
    let tracklets = dedup_tracks(prune_tracks(tracklets, &cfg.filter), &cfg.filter);
    let records = records_from_tracklets(&tracklets)?;
    Ok(PipelineOutput { raw_track_count, merged_track_count, tracklets, records })
}

/// Generates the scenario once and evaluates a run under each config.
pub fn ablation_compare(spec: &ScenarioSpec, configs: &[Config]) -> Result<Vec<EvalReport>, PipelineError> {
    let scenario = spec.generate()?;
    configs
        .iter()
        .map(|cfg| {
            let out = run(&scenario.detections, cfg)?;
            Ok(evaluate(&out.records, &scenario.ground_truth)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{scenario_a, scenario_b};

    #[test]
    fn ablation_rows() {
        let mut no_str = Config::default();
        no_str.tracker.enable_str = false;
        no_str.reid.enabled = false;
        let rows = ablation_compare(&scenario_a(), &[Config::default(), no_str.clone(), Config::default()]).unwrap();
        assert!(rows.iter().all(|r| r.total.smotsa() == 1.0 && r.total.ids == 0));
        assert_eq!(rows[0], rows[2]);

        let mut with_str = no_str.clone();
        with_str.tracker.enable_str = true;
        let rows = ablation_compare(&scenario_b(), &[with_str, no_str]).unwrap();
        assert_eq!(rows[0].total.ids, 0);
        assert_eq!(rows[1].total.ids, 3);
    }
}
