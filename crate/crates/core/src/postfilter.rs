//! Detection filters before tracking, track pruning and duplicate removal
//! after.

use crate::geometry::mask_iou;
use crate::reid::Tracklet;
use crate::tracker::{ClassId, Detection};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectRange {
    pub min: f64,
    pub max: f64,
}

impl AspectRange {
    /// Inclusive test on `h / w`.
    pub fn contains(&self, h: f64, w: f64) -> bool {
        if !(w > 0.0) {
            return false;
        }
        let r = h / w;
        r >= self.min && r <= self.max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub min_score: f64,
    pub min_box_area: f64,
    pub car_aspect: AspectRange,
    pub pedestrian_aspect: AspectRange,
    pub min_track_len: usize,
    pub min_track_avg_score: f64,
    pub traj_iou_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_score: 0.5,
            min_box_area: 100.0,
            car_aspect: AspectRange { min: 0.2, max: 2.0 },
            pedestrian_aspect: AspectRange { min: 1.0, max: 5.0 },
            min_track_len: 5,
            min_track_avg_score: 0.5,
            traj_iou_threshold: 0.75,
        }
    }
}

impl FilterConfig {
    pub fn aspect(&self, class_id: ClassId) -> &AspectRange {
        match class_id {
            ClassId::Car => &self.car_aspect,
            ClassId::Pedestrian => &self.pedestrian_aspect,
        }
    }

    pub fn accepts(&self, det: &Detection) -> bool {
        det.score >= self.min_score
            && det.bbox.area() >= self.min_box_area
            && self.aspect(det.class_id).contains(det.bbox.h, det.bbox.w)
    }
}

/// Keeps detections passing the score, area and aspect-ratio filters, in order.
pub fn filter_detections(dets: Vec<Detection>, cfg: &FilterConfig) -> Vec<Detection> {
    dets.into_iter().filter(|d| cfg.accepts(d)).collect()
}

/// Drops tracks that are too short or have a low mean score.
pub fn prune_tracks(tracks: Vec<Tracklet>, cfg: &FilterConfig) -> Vec<Tracklet> {
    tracks
        .into_iter()
        .filter(|t| t.len() >= cfg.min_track_len && t.mean_score() >= cfg.min_track_avg_score)
        .collect()
}

/// Mean mask IOU over the frames both tracks cover; 0 without a common frame.
pub fn trajectory_iou(a: &Tracklet, b: &Tracklet) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    let (oa, ob) = (a.observations(), b.observations());
    let (mut i, mut j) = (0, 0);
    while i < oa.len() && j < ob.len() {
        match oa[i].frame.cmp(&ob[j].frame) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += mask_iou(&oa[i].mask, &ob[j].mask).unwrap_or(0.0);
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Removes the shorter track of every same-class pair whose trajectory IOU
/// exceeds the threshold (equal lengths: the higher id goes). Tracks are
/// visited longest first and each is kept only if it conflicts with no kept
/// track, which is the fixpoint of repeatedly applying the pairwise rule.
/// Output keeps input order.
pub fn dedup_tracks(tracks: Vec<Tracklet>, cfg: &FilterConfig) -> Vec<Tracklet> {
    let mut order: Vec<usize> = (0..tracks.len()).collect();
    order.sort_by(|&a, &b| tracks[b].len().cmp(&tracks[a].len()).then(tracks[a].id.cmp(&tracks[b].id)));
    let mut keep = vec![false; tracks.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let conflict = kept.iter().any(|&k| {
            tracks[k].class_id() == tracks[i].class_id() && trajectory_iou(&tracks[k], &tracks[i]) > cfg.traj_iou_threshold
        });
        if !conflict {
            keep[i] = true;
            kept.push(i);
        }
    }
    tracks.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect()
}
