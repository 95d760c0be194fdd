//! Offline re-identification across long occlusions.
//!
//! Finished tracks become tracklets. Two tracklets of the same class that do
//! not overlap in time, are separated by a bounded gap and look alike are
//! candidates; a candidate is accepted if motion agrees. With a static camera
//! both tracklets are extrapolated into the gap and their boxes must overlap;
//! with a moving camera the mean top-left displacement at the end of the
//! earlier tracklet must point the same way as at the start of the later one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, FeatureBank};
use crate::tracker::{extrapolate_box, Anchor, ClassId, Observation, Track, TrackId, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraMode {
    Static,
    Moving,
}

impl FromStr for CameraMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(CameraMode::Static),
            "moving" => Ok(CameraMode::Moving),
            other => Err(format!("unknown camera mode {other:?}")),
        }
    }
}

impl fmt::Display for CameraMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CameraMode::Static => "static",
            CameraMode::Moving => "moving",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReidConfig {
    pub car_n2_seconds: f64,
    pub pedestrian_n2_seconds: f64,
    pub n3_frames: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub camera_mode: CameraMode,
    pub enabled: bool,
}

impl Default for ReidConfig {
    fn default() -> Self {
        Self {
            car_n2_seconds: 0.5,
            pedestrian_n2_seconds: 1.0,
            n3_frames: 5,
            beta1: 0.6,
            beta2: 0.5,
            beta3: 0.8,
            camera_mode: CameraMode::Static,
            enabled: true,
        }
    }
}

impl ReidConfig {
    pub fn n2_seconds(&self, class_id: ClassId) -> f64 {
        match class_id {
            ClassId::Car => self.car_n2_seconds,
            ClassId::Pedestrian => self.pedestrian_n2_seconds,
        }
    }

    /// Longest allowed gap in frames, `round(n2_seconds * fps)`.
    pub fn n2_frames(&self, class_id: ClassId, fps: f64) -> u32 {
        (self.n2_seconds(class_id) * fps).round() as u32
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackletError {
    #[error("tracklet has no observations")]
    Empty,
    #[error("tracklet frames not strictly increasing at frame {0}")]
    NonIncreasing(u32),
}

/// A finished track segment.
#[derive(Debug, Clone)]
pub struct Tracklet {
    pub id: TrackId,
    observations: Vec<Observation>,
    bank: FeatureBank,
}

impl Tracklet {
    /// Builds a tracklet; the feature bank is rebuilt from the observations.
    pub fn new(id: TrackId, observations: Vec<Observation>, bank_size: usize) -> Result<Self, TrackletError> {
        if observations.is_empty() {
            return Err(TrackletError::Empty);
        }
        let mut bank = FeatureBank::new(bank_size);
        for o in &observations {
            bank.update(o.embedding.clone(), o.frame).map_err(|_| TrackletError::NonIncreasing(o.frame))?;
        }
        Ok(Self { id, observations, bank })
    }

    pub fn from_track(track: Track) -> Self {
        Self { id: track.id, observations: track.history, bank: track.bank }
    }

    pub fn class_id(&self) -> ClassId {
        self.id.class_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn bank(&self) -> &FeatureBank {
        &self.bank
    }

    pub fn first_frame(&self) -> u32 {
        self.observations[0].frame
    }

    pub fn last_frame(&self) -> u32 {
        self.observations[self.observations.len() - 1].frame
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn mean_score(&self) -> f64 {
        self.observations.iter().map(|o| o.score).sum::<f64>() / self.observations.len() as f64
    }

    pub fn observation_at(&self, frame: u32) -> Option<&Observation> {
        self.observations.binary_search_by_key(&frame, |o| o.frame).ok().map(|i| &self.observations[i])
    }

    fn into_observations(self) -> Vec<Observation> {
        self.observations
    }
}

/// Mean per-frame top-left displacement, pixels per observation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector {
    pub mx: f64,
    pub my: f64,
    /// False when fewer than two observations were available.
    pub reliable: bool,
}

impl MotionVector {
    pub fn magnitude(&self) -> f64 {
        self.mx.hypot(self.my)
    }
}

/// Which end of a tracklet a motion window is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Head,
    Tail,
}

/// Averages consecutive top-left displacements over the first or last
/// `min(n3, len)` observations.
pub fn motion_vector(tr: &Tracklet, end: End, n3: usize) -> MotionVector {
    let obs = tr.observations();
    let k = n3.min(obs.len());
    let window = match end {
        End::Head => &obs[..k],
        End::Tail => &obs[obs.len() - k..],
    };
    if window.len() < 2 {
        return MotionVector { mx: 0.0, my: 0.0, reliable: false };
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for pair in window.windows(2) {
        sx += pair[1].bbox.x - pair[0].bbox.x;
        sy += pair[1].bbox.y - pair[0].bbox.y;
    }
    let steps = (window.len() - 1) as f64;
    MotionVector { mx: sx / steps, my: sy / steps, reliable: true }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Index of the earlier tracklet.
    pub u: usize,
    /// Index of the later tracklet.
    pub v: usize,
    pub similarity: f64,
}

/// Same-class ordered pairs with `last(u) < first(v)`, a gap of at most
/// `round(n2 * fps)` missing frames, and bank similarity above beta1.
pub fn candidate_pairs(tracklets: &[Tracklet], cfg: &ReidConfig, fps: f64) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (u, a) in tracklets.iter().enumerate() {
        for (v, b) in tracklets.iter().enumerate() {
            if a.class_id() != b.class_id() || a.last_frame() >= b.first_frame() {
                continue;
            }
            let gap = b.first_frame() - a.last_frame() - 1;
            if gap > cfg.n2_frames(a.class_id(), fps) {
                continue;
            }
            let Ok(similarity) = a.bank().cross_similarity(b.bank()) else {
                continue;
            };
            if similarity > cfg.beta1 {
                out.push(Candidate { u, v, similarity });
            }
        }
    }
    out
}

/// Mean box IOU over the gap between `u` extrapolated forward and `v`
/// extrapolated backward; for adjacent tracklets, IOU of the facing boxes.
pub fn gap_overlap(u: &Tracklet, v: &Tracklet, tcfg: &TrackerConfig) -> f64 {
    let (start, end) = (u.last_frame() + 1, v.first_frame());
    if start >= end {
        return u.observations().last().unwrap().bbox.iou(&v.observations()[0].bbox);
    }
    let total: f64 = (start..end)
        .map(|g| {
            let pu = extrapolate_box(u.observations(), Anchor::Tail, g, tcfg.huber_window, tcfg.huber_delta)
                .unwrap_or_else(|e| e.fallback);
            let pv = extrapolate_box(v.observations(), Anchor::Head, g, tcfg.huber_window, tcfg.huber_delta)
                .unwrap_or_else(|e| e.fallback);
            pu.iou(&pv)
        })
        .sum();
    total / (end - start) as f64
}

pub fn static_merge_test(u: &Tracklet, v: &Tracklet, cfg: &ReidConfig, tcfg: &TrackerConfig) -> bool {
    gap_overlap(u, v, tcfg) > cfg.beta2
}

/// Direction agreement of two motion vectors: cosine above `max(0, beta3)`;
/// a zero or unreliable vector has no direction and never agrees.
pub fn motion_agrees(mu: &MotionVector, mv: &MotionVector, beta3: f64) -> bool {
    if !mu.reliable || !mv.reliable || mu.magnitude() == 0.0 || mv.magnitude() == 0.0 {
        return false;
    }
    let c = cosine(&[mu.mx, mu.my], &[mv.mx, mv.my]).unwrap_or(0.0);
    c > 0.0 && c > beta3
}

pub fn moving_merge_test(u: &Tracklet, v: &Tracklet, cfg: &ReidConfig) -> bool {
    let mu = motion_vector(u, End::Tail, cfg.n3_frames);
    let mv = motion_vector(v, End::Head, cfg.n3_frames);
    motion_agrees(&mu, &mv, cfg.beta3)
}

fn passes(u: &Tracklet, v: &Tracklet, cfg: &ReidConfig, tcfg: &TrackerConfig) -> bool {
    match cfg.camera_mode {
        CameraMode::Static => static_merge_test(u, v, cfg, tcfg),
        CameraMode::Moving => moving_merge_test(u, v, cfg),
    }
}

/// Greedy merging, most similar candidates first, repeated until a pass
/// accepts nothing. Within a pass each tracklet gains at most one successor
/// and one predecessor; a merged chain keeps the id of its earliest member.
pub fn merge_pass(mut tracklets: Vec<Tracklet>, cfg: &ReidConfig, tcfg: &TrackerConfig) -> Vec<Tracklet> {
    loop {
        let mut cands = candidate_pairs(&tracklets, cfg, tcfg.fps);
        cands.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.u.cmp(&b.u)).then(a.v.cmp(&b.v)));

        let n = tracklets.len();
        let mut next: Vec<Option<usize>> = vec![None; n];
        let mut has_prev = vec![false; n];
        for c in &cands {
            if next[c.u].is_some() || has_prev[c.v] {
                continue;
            }
            if passes(&tracklets[c.u], &tracklets[c.v], cfg, tcfg) {
                next[c.u] = Some(c.v);
                has_prev[c.v] = true;
            }
        }
        if !has_prev.iter().any(|&p| p) {
            return tracklets;
        }

        let mut slots: Vec<Option<Tracklet>> = tracklets.into_iter().map(Some).collect();
        let mut merged = Vec::with_capacity(n);
        for head in 0..n {
            if has_prev[head] {
                continue;
            }
            let first = slots[head].take().expect("each tracklet visited once");
            let (id, bank_size) = (first.id, first.bank().capacity());
            if next[head].is_none() {
                merged.push(first);
                continue;
            }
            let mut obs = first.into_observations();
            let mut cur = next[head];
            while let Some(i) = cur {
                obs.extend(slots[i].take().expect("chain member visited once").into_observations());
                cur = next[i];
            }
            merged.push(Tracklet::new(id, obs, bank_size).expect("chained tracklets are time-ordered"));
        }
        tracklets = merged;
    }
}
