//! Online frame-to-frame association.
//!
//! Each frame runs two matchers. Tracks that were matched in the previous
//! frame are assigned to detections by the Hungarian method on
//! `2 - maskIOU - bank similarity`. Tracks that missed one or more frames are
//! then offered the leftover detections through short-term retrieval: their
//! box is extrapolated to the current frame with a robust line fit and
//! compared by box overlap and appearance, gated by distance. Leftover
//! detections spawn new tracks; tracks that stay unmatched for longer than
//! the class memory are terminated and never matched again.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian_solve, CostMatrix, INFEASIBLE};
use crate::embedding::{self, Embedding, EmbeddingError, FeatureBank, FeatureMap};
use crate::geometry::{mask_iou, BBox, BinaryMask, MaskError};
use crate::huber::huber_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ClassId {
    Car,
    Pedestrian,
}

impl ClassId {
    pub const ALL: [ClassId; 2] = [ClassId::Car, ClassId::Pedestrian];

    pub fn code(self) -> u32 {
        match self {
            ClassId::Car => 1,
            ClassId::Pedestrian => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(ClassId::Car),
            2 => Some(ClassId::Pedestrian),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Car => "car",
            ClassId::Pedestrian => "pedestrian",
        }
    }
}

impl TryFrom<u32> for ClassId {
    type Error = String;
    fn try_from(code: u32) -> Result<Self, String> {
        ClassId::from_code(code).ok_or_else(|| format!("unknown class id {code}"))
    }
}

impl From<ClassId> for u32 {
    fn from(c: ClassId) -> u32 {
        c.code()
    }
}

/// Track identity: class plus a per-class serial starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackId {
    pub class_id: ClassId,
    pub serial: u32,
}

impl TrackId {
    /// MOTS-style integer id, `class * 1000 + serial`.
    pub fn mots_id(&self) -> u32 {
        self.class_id.code() * 1000 + self.serial
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mots_id())
    }
}

/// Appearance input attached to a detection.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Map(FeatureMap),
    Embedding(Embedding),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: BBox,
    pub mask: BinaryMask,
    pub features: Features,
}

impl Detection {
    /// Instance-aware embedding: pooled from the feature map under the mask
    /// attention, or the supplied vector normalized.
    pub fn embedding(&self) -> Result<Embedding, EmbeddingError> {
        match &self.features {
            Features::Embedding(e) => Ok(Embedding::normalized(e.values().to_vec())),
            Features::Map(fmap) => {
                let attn = embedding::spatial_attention(&self.mask, &self.bbox, fmap.grid_h(), fmap.grid_w())?;
                embedding::instance_aware_pool(fmap, &attn)
            }
        }
    }
}

/// One matched detection in a track's history.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub bbox: BBox,
    pub mask: BinaryMask,
    pub score: f64,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Lost,
    Terminated,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub state: TrackState,
    pub history: Vec<Observation>,
    pub bank: FeatureBank,
    pub last_matched_frame: u32,
}

impl Track {
    pub fn class_id(&self) -> ClassId {
        self.id.class_id
    }

    pub fn last(&self) -> &Observation {
        self.history.last().expect("tracks are created with one observation")
    }

    fn push(&mut self, obs: Observation) -> Result<(), EmbeddingError> {
        self.bank.update(obs.embedding.clone(), obs.frame)?;
        self.last_matched_frame = obs.frame;
        self.state = TrackState::Active;
        self.history.push(obs);
        Ok(())
    }
}

/// Per-class association parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParams {
    /// Memory before a lost track is terminated, in seconds.
    pub n1_seconds: f64,
    /// Matched pairs costing more than this are discarded.
    pub gate_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub fps: f64,
    pub car: ClassParams,
    pub pedestrian: ClassParams,
    /// Huber threshold in units of the estimated residual scale.
    pub huber_delta: f64,
    /// Observations used for extrapolation.
    pub huber_window: usize,
    /// Retrieval gate: top-left distance at most this many track widths.
    pub str_distance_factor: f64,
    pub bank_size: usize,
    pub enable_str: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            car: ClassParams { n1_seconds: 0.1, gate_cost: 1.7 },
            pedestrian: ClassParams { n1_seconds: 0.2, gate_cost: 1.7 },
            huber_delta: 1.345,
            huber_window: 10,
            str_distance_factor: 2.0,
            bank_size: embedding::DEFAULT_BANK_SIZE,
            enable_str: true,
        }
    }
}

impl TrackerConfig {
    pub fn class(&self, class_id: ClassId) -> &ClassParams {
        match class_id {
            ClassId::Car => &self.car,
            ClassId::Pedestrian => &self.pedestrian,
        }
    }

    /// Termination memory in frames, `round(n1_seconds * fps)`.
    pub fn n1_frames(&self, class_id: ClassId) -> u32 {
        (self.class(class_id).n1_seconds * self.fps).round() as u32
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |what: &str| Err(TrackerError::InvalidConfig(what.to_string()));
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad("fps must be positive");
        }
        for c in ClassId::ALL {
            let p = self.class(c);
            if !(p.n1_seconds > 0.0 && p.n1_seconds.is_finite()) {
                return bad("n1_seconds must be positive");
            }
            if !(p.gate_cost > 0.0 && p.gate_cost <= 3.0) {
                return bad("gate_cost must be in (0, 3]");
            }
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return bad("huber_delta must be positive");
        }
        if self.huber_window < 2 {
            return bad("huber_window must be at least 2");
        }
        if !(self.str_distance_factor > 0.0 && self.str_distance_factor.is_finite()) {
            return bad("str_distance_factor must be positive");
        }
        if self.bank_size == 0 {
            return bad("bank_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("frame {frame} is not after previous frame {last}")]
    OutOfOrderFrame { frame: u32, last: u32 },
    #[error("detection for frame {found} passed to step for frame {expected}")]
    FrameMismatch { expected: u32, found: u32 },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Not enough history to fit a line; carries the box to fall back on.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("insufficient history for extrapolation")]
pub struct InsufficientHistory {
    pub fallback: BBox,
}

/// Which end of a history to extrapolate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Fit the last `window` observations and extrapolate forward.
    Tail,
    /// Fit the first `window` observations and extrapolate backward.
    Head,
}

/// Top-left corner fitted per axis with [`huber_fit`] and evaluated at
/// `target_frame`; size copied from the anchoring observation.
pub fn extrapolate_box(
    history: &[Observation],
    anchor: Anchor,
    target_frame: u32,
    window: usize,
    delta: f64,
) -> Result<BBox, InsufficientHistory> {
    let (slice, anchor_obs) = match anchor {
        Anchor::Tail => {
            let start = history.len().saturating_sub(window);
            (&history[start..], history.last())
        }
        Anchor::Head => (&history[..window.min(history.len())], history.first()),
    };
    let anchor_obs = anchor_obs.expect("extrapolating an empty history");
    let fallback = anchor_obs.bbox;
    if slice.len() < 2 {
        return Err(InsufficientHistory { fallback });
    }
    let origin = anchor_obs.frame as f64;
    let xs: Vec<(f64, f64)> = slice.iter().map(|o| (o.frame as f64 - origin, o.bbox.x)).collect();
    let ys: Vec<(f64, f64)> = slice.iter().map(|o| (o.frame as f64 - origin, o.bbox.y)).collect();
    let (fx, fy) = match (huber_fit(&xs, delta), huber_fit(&ys, delta)) {
        (Ok(fx), Ok(fy)) => (fx, fy),
        _ => return Err(InsufficientHistory { fallback }),
    };
    let t = target_frame as f64 - origin;
    Ok(BBox::new(fx.eval(t), fy.eval(t), fallback.w, fallback.h))
}

/// Forward extrapolation of a track to `target_frame`.
pub fn extrapolate_track(track: &Track, target_frame: u32, cfg: &TrackerConfig) -> Result<BBox, InsufficientHistory> {
    extrapolate_box(&track.history, Anchor::Tail, target_frame, cfg.huber_window, cfg.huber_delta)
}

/// `2 - maskIOU(last track mask, detection mask) - bank similarity`, or
/// [`INFEASIBLE`] across classes.
pub fn assignment_cost(track: &Track, det: &Detection, det_embedding: &Embedding) -> Result<f64, TrackerError> {
    if track.class_id() != det.class_id {
        return Ok(INFEASIBLE);
    }
    let iou = mask_iou(&track.last().mask, &det.mask)?;
    let sim = track.bank.similarity(det_embedding)?;
    Ok((2.0 - iou - sim).clamp(0.0, 3.0))
}

/// Short-term retrieval cost: `2 - bank similarity - boxIOU(extrapolated,
/// detection)`, infeasible across classes or when the top-left corners are
/// further apart than `str_distance_factor` widths of the track's last box.
pub fn retrieval_cost(
    track: &Track,
    predicted: &BBox,
    det: &Detection,
    det_embedding: &Embedding,
    cfg: &TrackerConfig,
) -> Result<f64, TrackerError> {
    if track.class_id() != det.class_id {
        return Ok(INFEASIBLE);
    }
    let reach = cfg.str_distance_factor * track.last().bbox.w;
    if predicted.top_left_distance(&det.bbox) > reach {
        return Ok(INFEASIBLE);
    }
    let sim = track.bank.similarity(det_embedding)?;
    Ok((2.0 - sim - predicted.iou(&det.bbox)).clamp(0.0, 3.0))
}

/// Matches lost tracks to unassigned detections at `frame`. Returns
/// `(track index, detection index)` pairs into the given slices.
pub fn str_match(
    lost: &[&Track],
    dets: &[(&Detection, &Embedding)],
    frame: u32,
    cfg: &TrackerConfig,
) -> Result<Vec<(usize, usize)>, TrackerError> {
    let mut costs = CostMatrix::new(lost.len(), dets.len());
    for (r, track) in lost.iter().enumerate() {
        let predicted = extrapolate_track(track, frame, cfg).unwrap_or_else(|e| e.fallback);
        for (c, (det, emb)) in dets.iter().enumerate() {
            costs.set(r, c, retrieval_cost(track, &predicted, det, emb, cfg)?);
        }
    }
    let mut pairs = hungarian_solve(&costs);
    pairs.retain(|&(r, c)| costs.get(r, c) <= cfg.class(lost[r].class_id()).gate_cost);
    Ok(pairs)
}

/// What happened to each track and detection in one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub frame: u32,
    /// Detections matched by the primary assignment.
    pub matched: Vec<(TrackId, usize)>,
    /// Detections recovered by short-term retrieval.
    pub retrieved: Vec<(TrackId, usize)>,
    pub spawned: Vec<(TrackId, usize)>,
    pub terminated: Vec<TrackId>,
}

/// Tracker state for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_serial: [u32; 2],
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self { cfg, tracks: Vec::new(), next_serial: [1, 1], last_frame: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    fn spawn(&mut self, obs: Observation, class_id: ClassId) -> Result<TrackId, TrackerError> {
        let slot = &mut self.next_serial[class_id.code() as usize - 1];
        let id = TrackId { class_id, serial: *slot };
        *slot += 1;
        let mut track = Track {
            id,
            state: TrackState::Active,
            history: Vec::new(),
            bank: FeatureBank::new(self.cfg.bank_size),
            last_matched_frame: obs.frame,
        };
        track.push(obs)?;
        self.tracks.push(track);
        Ok(id)
    }

    /// Advances the tracker by one frame.
    pub fn step(&mut self, frame: u32, detections: Vec<Detection>) -> Result<FrameOutput, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::OutOfOrderFrame { frame, last });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(TrackerError::FrameMismatch { expected: frame, found: d.frame });
        }
        let embeddings = detections.iter().map(Detection::embedding).collect::<Result<Vec<_>, _>>()?;
        self.last_frame = Some(frame);
        let mut out = FrameOutput { frame, ..Default::default() };

        // frames skipped by the caller still count towards termination
        for t in &mut self.tracks {
            if t.state != TrackState::Terminated && frame - t.last_matched_frame - 1 > self.cfg.n1_frames(t.class_id()) {
                t.state = TrackState::Terminated;
                out.terminated.push(t.id);
            }
        }

        let live = |t: &Track| t.state != TrackState::Terminated;
        let active: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| live(&self.tracks[i]) && self.tracks[i].last_matched_frame + 1 == frame)
            .collect();
        let lost: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| live(&self.tracks[i]) && self.tracks[i].last_matched_frame + 1 < frame)
            .collect();

        let mut det_taken = vec![false; detections.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();

        let mut costs = CostMatrix::new(active.len(), detections.len());
        for (r, &ti) in active.iter().enumerate() {
            for (c, det) in detections.iter().enumerate() {
                costs.set(r, c, assignment_cost(&self.tracks[ti], det, &embeddings[c])?);
            }
        }
        for (r, c) in hungarian_solve(&costs) {
            let ti = active[r];
            if costs.get(r, c) <= self.cfg.class(self.tracks[ti].class_id()).gate_cost {
                det_taken[c] = true;
                matches.push((ti, c));
                out.matched.push((self.tracks[ti].id, c));
            }
        }

        if self.cfg.enable_str && !lost.is_empty() {
            let free: Vec<usize> = (0..detections.len()).filter(|&c| !det_taken[c]).collect();
            let lost_refs: Vec<&Track> = lost.iter().map(|&i| &self.tracks[i]).collect();
            let det_refs: Vec<(&Detection, &Embedding)> = free.iter().map(|&c| (&detections[c], &embeddings[c])).collect();
            for (r, k) in str_match(&lost_refs, &det_refs, frame, &self.cfg)? {
                let (ti, c) = (lost[r], free[k]);
                det_taken[c] = true;
                matches.push((ti, c));
                out.retrieved.push((self.tracks[ti].id, c));
            }
        }

        let mut dets: Vec<Option<Detection>> = detections.into_iter().map(Some).collect();
        let mut embs: Vec<Option<Embedding>> = embeddings.into_iter().map(Some).collect();
        let mut observe = |c: usize| {
            let d = dets[c].take().expect("detection used once");
            let e = embs[c].take().expect("embedding used once");
            (Observation { frame, bbox: d.bbox, mask: d.mask, score: d.score, embedding: e }, d.class_id)
        };
        for &(ti, c) in &matches {
            let (obs, _) = observe(c);
            self.tracks[ti].push(obs)?;
        }
        let n_before_spawn = self.tracks.len();
        for c in 0..det_taken.len() {
            if !det_taken[c] {
                let (obs, class_id) = observe(c);
                let id = self.spawn(obs, class_id)?;
                out.spawned.push((id, c));
            }
        }

        for t in &mut self.tracks[..n_before_spawn] {
            if t.state == TrackState::Terminated || t.last_matched_frame == frame {
                continue;
            }
            if frame - t.last_matched_frame > self.cfg.n1_frames(t.class_id()) {
                t.state = TrackState::Terminated;
                out.terminated.push(t.id);
            } else {
                t.state = TrackState::Lost;
            }
        }
        Ok(out)
    }

    /// All tracks ever created, in creation order.
    pub fn finish(self) -> Vec<Track> {
        self.tracks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: u32 = 100;
    const W: u32 = 200;

    fn det(frame: u32, x: i64, y: i64, emb: &[f64]) -> Detection {
        Detection {
            frame,
            class_id: ClassId::Pedestrian,
            score: 0.9,
            bbox: BBox::new(x as f64, y as f64, 10.0, 20.0),
            mask: BinaryMask::from_rect(H, W, x, y, 10, 20).unwrap(),
            features: Features::Embedding(Embedding::raw(emb.to_vec())),
        }
    }

    fn obs(frame: u32, x: f64, y: f64) -> Observation {
        Observation {
            frame,
            bbox: BBox::new(x, y, 10.0, 20.0),
            mask: BinaryMask::empty(4, 4).unwrap(),
            score: 1.0,
            embedding: Embedding::raw(vec![1.0]),
        }
    }

    fn cfg() -> TrackerConfig {
        TrackerConfig { fps: 25.0, ..Default::default() }
    }

    fn track_with(history: Vec<Observation>) -> Track {
        let mut bank = FeatureBank::default();
        for o in &history {
            bank.update(o.embedding.clone(), o.frame).unwrap();
        }
        Track {
            id: TrackId { class_id: ClassId::Pedestrian, serial: 1 },
            state: TrackState::Active,
            last_matched_frame: history.last().unwrap().frame,
            history,
            bank,
        }
    }

    #[test]
    fn cost_values() {
        let mut t = Tracker::new(cfg()).unwrap();
        t.step(1, vec![det(1, 10, 10, &[1.0, 0.0])]).unwrap();
        let track = &t.tracks()[0];
        let same = det(2, 10, 10, &[1.0, 0.0]);
        assert_eq!(assignment_cost(track, &same, &same.embedding().unwrap()).unwrap(), 0.0);
        let far = det(2, 100, 50, &[0.0, 1.0]);
        assert_eq!(assignment_cost(track, &far, &far.embedding().unwrap()).unwrap(), 2.0);
        let mut car = far.clone();
        car.class_id = ClassId::Car;
        assert_eq!(assignment_cost(track, &car, &car.embedding().unwrap()).unwrap(), INFEASIBLE);
    }

    #[test]
    fn cost_formula_half_iou() {
        // 15-wide boxes offset by 5 columns: IOU 10/20 = 0.5; similarity 0.7
        let mut a = det(1, 0, 0, &[1.0, 0.0]);
        a.mask = BinaryMask::from_rect(H, W, 0, 0, 15, 20).unwrap();
        let mut b = det(2, 5, 0, &[0.7, 0.714142842854285]);
        b.mask = BinaryMask::from_rect(H, W, 5, 0, 15, 20).unwrap();
        let mut t = Tracker::new(cfg()).unwrap();
        t.step(1, vec![a]).unwrap();
        let e = b.embedding().unwrap();
        let c = assignment_cost(&t.tracks()[0], &b, &e).unwrap();
        assert!((mask_iou(&t.tracks()[0].last().mask, &b.mask).unwrap() - 0.5).abs() < 1e-15);
        assert!((c - 0.8).abs() < 1e-9, "{c}");
    }

    #[test]
    fn extrapolation_examples() {
        let still = track_with((1..=6).map(|f| obs(f, 40.0, 30.0)).collect());
        assert_eq!(extrapolate_track(&still, 20, &cfg()).unwrap(), BBox::new(40.0, 30.0, 10.0, 20.0));

        let moving = track_with((1..=5).map(|f| obs(f, 2.0 * f as f64, 7.0)).collect());
        let b = extrapolate_track(&moving, 8, &cfg()).unwrap();
        assert!((b.x - 16.0).abs() < 1e-9 && (b.y - 7.0).abs() < 1e-9);
        assert_eq!((b.w, b.h), (10.0, 20.0));

        let single = track_with(vec![obs(3, 5.0, 6.0)]);
        let err = extrapolate_track(&single, 9, &cfg()).unwrap_err();
        assert_eq!(err.fallback, BBox::new(5.0, 6.0, 10.0, 20.0));
    }

    #[test]
    fn backward_extrapolation() {
        let hist: Vec<Observation> = (10..=14).map(|f| obs(f, 3.0 * f as f64, 0.0)).collect();
        let b = extrapolate_box(&hist, Anchor::Head, 7, 10, 1.345).unwrap();
        assert!((b.x - 21.0).abs() < 1e-9);
    }

    #[test]
    fn single_track_extended() {
        let mut t = Tracker::new(cfg()).unwrap();
        for f in 1..=5 {
            let out = t.step(f, vec![det(f, 10 + f as i64, 10, &[1.0, 0.0])]).unwrap();
            if f > 1 {
                assert_eq!(out.matched.len(), 1);
                assert!(out.spawned.is_empty());
            }
        }
        assert_eq!(t.tracks().len(), 1);
        assert_eq!(t.tracks()[0].history.len(), 5);
    }

    #[test]
    fn terminates_after_memory() {
        let c = cfg();
        let n1 = c.n1_frames(ClassId::Pedestrian);
        assert_eq!(n1, 5);
        let mut t = Tracker::new(c).unwrap();
        t.step(1, vec![det(1, 10, 10, &[1.0])]).unwrap();
        for f in 2..=(1 + n1) {
            t.step(f, vec![]).unwrap();
            assert_eq!(t.tracks()[0].state, TrackState::Lost);
        }
        let out = t.step(n1 + 2, vec![]).unwrap();
        assert_eq!(out.terminated, vec![t.tracks()[0].id]);
        assert_eq!(t.tracks()[0].state, TrackState::Terminated);
        // a perfect detection no longer revives it
        let out = t.step(n1 + 3, vec![det(n1 + 3, 10, 10, &[1.0])]).unwrap();
        assert_eq!(out.spawned.len(), 1);
        assert_eq!(t.tracks()[0].history.len(), 1);
    }

    #[test]
    fn termination_counts_skipped_frames() {
        let mut t = Tracker::new(cfg()).unwrap();
        t.step(1, vec![det(1, 10, 10, &[1.0])]).unwrap();
        let out = t.step(20, vec![det(20, 10, 10, &[1.0])]).unwrap();
        assert_eq!(out.terminated.len(), 1);
        assert_eq!(out.spawned.len(), 1);
    }

    #[test]
    fn retrieval_after_gap() {
        let mut t = Tracker::new(cfg()).unwrap();
        for f in 1..=6 {
            t.step(f, vec![det(f, 10 + 3 * f as i64, 10, &[1.0, 0.0])]).unwrap();
        }
        for f in 7..=9 {
            t.step(f, vec![]).unwrap();
        }
        let out = t.step(10, vec![det(10, 40, 10, &[1.0, 0.0])]).unwrap();
        assert_eq!(out.retrieved.len(), 1);
        assert!(out.spawned.is_empty());
        assert_eq!(t.tracks()[0].state, TrackState::Active);

        let mut no_str = Tracker::new(TrackerConfig { enable_str: false, ..cfg() }).unwrap();
        for f in 1..=6 {
            no_str.step(f, vec![det(f, 10 + 3 * f as i64, 10, &[1.0, 0.0])]).unwrap();
        }
        let out = no_str.step(10, vec![det(10, 40, 10, &[1.0, 0.0])]).unwrap();
        assert_eq!(out.spawned.len(), 1);
    }

    #[test]
    fn retrieval_distance_gate() {
        let c = cfg();
        let track = track_with((1..=5).map(|f| obs(f, 50.0, 30.0)).collect());
        let predicted = extrapolate_track(&track, 7, &c).unwrap();
        // three widths to the right, identical appearance
        let d = det(7, 80, 30, &[1.0]);
        let cost = retrieval_cost(&track, &predicted, &d, &d.embedding().unwrap(), &c).unwrap();
        assert_eq!(cost, INFEASIBLE);
        let near = det(7, 50, 30, &[1.0]);
        let cost = retrieval_cost(&track, &predicted, &near, &near.embedding().unwrap(), &c).unwrap();
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn retrieval_prefers_similar_track() {
        let c = cfg();
        let mut a = track_with((1..=5).map(|f| obs(f, 40.0, 30.0)).collect());
        let mut b = track_with((1..=5).map(|f| obs(f, 60.0, 30.0)).collect());
        a.bank = FeatureBank::default();
        a.bank.update(Embedding::raw(vec![1.0, 0.0]), 5).unwrap();
        b.bank = FeatureBank::default();
        b.bank.update(Embedding::raw(vec![0.6, 0.8]), 5).unwrap();
        let d = det(7, 50, 30, &[1.0, 0.0]);
        let e = d.embedding().unwrap();
        let ca = retrieval_cost(&a, &extrapolate_track(&a, 7, &c).unwrap(), &d, &e, &c).unwrap();
        let cb = retrieval_cost(&b, &extrapolate_track(&b, 7, &c).unwrap(), &d, &e, &c).unwrap();
        // equal box overlap, similarity 1.0 vs 0.6
        assert!((cb - ca - 0.4).abs() < 1e-12);
        let pairs = str_match(&[&a, &b], &[(&d, &e)], 7, &c).unwrap();
        assert_eq!(pairs, vec![(0, 0)]);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut t = Tracker::new(cfg()).unwrap();
        t.step(5, vec![]).unwrap();
        assert!(matches!(t.step(5, vec![]), Err(TrackerError::OutOfOrderFrame { frame: 5, last: 5 })));
        assert!(matches!(t.step(6, vec![det(7, 0, 0, &[1.0])]), Err(TrackerError::FrameMismatch { .. })));
    }

    #[test]
    fn ids_per_class() {
        let mut t = Tracker::new(cfg()).unwrap();
        let mut car = det(1, 100, 10, &[0.0, 1.0]);
        car.class_id = ClassId::Car;
        let out = t.step(1, vec![det(1, 10, 10, &[1.0, 0.0]), car, det(1, 50, 60, &[1.0, 1.0])]).unwrap();
        let ids: Vec<u32> = out.spawned.iter().map(|(id, _)| id.mots_id()).collect();
        assert_eq!(ids, vec![2001, 1001, 2002]);
    }
}
