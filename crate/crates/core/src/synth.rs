//! Synthetic sequences with known ground truth.
//!
//! Objects are axis-aligned rectangles in linear motion. Lower-numbered
//! objects are drawn in front, so visible masks are disjoint. Ground truth
//! holds every visible mask; the detector model removes occluded frames and
//! random dropouts and perturbs scores, boxes and embeddings. Identities carry
//! orthogonal prototype embeddings (unit basis vectors) plus gaussian noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{Embedding, FeatureMap};
use crate::geometry::{rle_to_string, BBox, BinaryMask};
use crate::io::{format_detections, format_results, DetectionSet, IoError, ResultRecord, SequenceMeta};
use crate::reid::CameraMode;
use crate::tracker::{ClassId, Detection, Features};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scenario out of bounds: {0}")]
    SpecOutOfBounds(String),
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class_id: ClassId,
    pub width: u32,
    pub height: u32,
    /// Top-left corner at the birth frame.
    pub x0: f64,
    pub y0: f64,
    /// Pixels per frame.
    pub vx: f64,
    pub vy: f64,
    pub birth: u32,
    pub death: u32,
}

impl ObjectSpec {
    pub fn alive(&self, frame: u32) -> bool {
        frame >= self.birth && frame <= self.death
    }

    /// Integer top-left corner at `frame`.
    pub fn corner(&self, frame: u32) -> (i64, i64) {
        let t = frame as f64 - self.birth as f64;
        ((self.x0 + self.vx * t).round() as i64, (self.y0 + self.vy * t).round() as i64)
    }
}

/// Frames `start ..= start + length - 1` of object `object` (1-based) are
/// missing from the detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub object: usize,
    pub start: u32,
    pub length: u32,
}

impl Occlusion {
    pub fn covers(&self, object: usize, frame: u32) -> bool {
        object == self.object && frame >= self.start && frame < self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub dropout: f64,
    pub score_min: f64,
    pub score_max: f64,
    /// Standard deviation of the box perturbation, pixels.
    pub box_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingModel {
    pub dim: usize,
    /// Standard deviation of the per-component noise.
    pub noise: f64,
    /// When set, detections carry a `grid x grid` feature map instead of a
    /// pooled vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub frames: u32,
    pub img_h: u32,
    pub img_w: u32,
    pub fps: f64,
    pub camera_mode: CameraMode,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
    pub detector: DetectorModel,
    pub embedding: EmbeddingModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub detections: DetectionSet,
    pub ground_truth: Vec<ResultRecord>,
}

impl Scenario {
    /// Writes `detections.jsonl` and `gt.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| IoError::Io { path, source })
        };
        put("detections.jsonl", format_detections(&self.detections))?;
        put("gt.txt", format_results(&self.ground_truth))?;
        Ok(())
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidSpec(m));
        let oob = |m: String| Err(SynthError::SpecOutOfBounds(m));
        if self.frames == 0 || self.img_h == 0 || self.img_w == 0 {
            return invalid("frames and image dimensions must be positive".into());
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return invalid("fps must be positive".into());
        }
        let d = &self.detector;
        if !in_unit(d.dropout) || !in_unit(d.score_min) || !in_unit(d.score_max) || d.score_min > d.score_max {
            return invalid("dropout and scores must lie in [0, 1] with score_min <= score_max".into());
        }
        if !(d.box_jitter >= 0.0 && d.box_jitter.is_finite()) {
            return invalid("box_jitter must be non-negative".into());
        }
        let e = &self.embedding;
        if e.dim < self.objects.len() || e.dim == 0 {
            return invalid(format!("embedding dim {} cannot hold {} orthogonal prototypes", e.dim, self.objects.len()));
        }
        if !(e.noise >= 0.0 && e.noise.is_finite()) || e.feature_grid == Some(0) {
            return invalid("embedding noise must be non-negative and feature_grid positive".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            let k = i + 1;
            if o.width == 0 || o.height == 0 || !(o.x0.is_finite() && o.y0.is_finite() && o.vx.is_finite() && o.vy.is_finite()) {
                return invalid(format!("object {k} has an empty or non-finite geometry"));
            }
            if o.birth < 1 || o.birth > o.death || o.death > self.frames {
                return oob(format!("object {k} lifetime {}..={} outside 1..={}", o.birth, o.death, self.frames));
            }
            // linear motion: the extremes are at birth and death
            for f in [o.birth, o.death] {
                let (x, y) = o.corner(f);
                if x < 0 || y < 0 || x + o.width as i64 > self.img_w as i64 || y + o.height as i64 > self.img_h as i64 {
                    return oob(format!("object {k} leaves the image at frame {f}"));
                }
            }
        }
        for occ in &self.occlusions {
            if occ.object == 0 || occ.object > self.objects.len() {
                return invalid(format!("occlusion refers to unknown object {}", occ.object));
            }
            if occ.length == 0 || occ.start < 1 || occ.start + occ.length - 1 > self.frames {
                return oob(format!("occlusion of object {} outside the sequence", occ.object));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta { name: self.name.clone(), fps: self.fps, img_h: self.img_h, img_w: self.img_w, camera_mode: self.camera_mode }
    }

    fn rect(&self, obj: &ObjectSpec, frame: u32) -> BinaryMask {
        let (x, y) = obj.corner(frame);
        BinaryMask::from_rect(self.img_h, self.img_w, x, y, obj.width, obj.height).expect("validated dimensions")
    }

    /// Visible masks at `frame`, per object (1-based number, mask).
    fn visible(&self, frame: u32) -> Vec<(usize, BinaryMask)> {
        let mut covered: Option<BinaryMask> = None;
        let mut out = Vec::new();
        for (i, obj) in self.objects.iter().enumerate() {
            if !obj.alive(frame) {
                continue;
            }
            let full = self.rect(obj, frame);
            let own = match &covered {
                Some(c) => full.difference(c).expect("same shape"),
                None => full.clone(),
            };
            covered = Some(match covered {
                Some(c) => c.union(&full).expect("same shape"),
                None => full,
            });
            if !own.is_empty() {
                out.push((i + 1, own));
            }
        }
        out
    }

    pub fn generate(&self) -> Result<Scenario, SynthError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let jitter = Normal::new(0.0, self.detector.box_jitter).expect("validated jitter");
        let noise = Normal::new(0.0, self.embedding.noise).expect("validated noise");
        let dim = self.embedding.dim;

        let mut frames = Vec::new();
        let mut ground_truth = Vec::new();
        for frame in 1..=self.frames {
            let mut dets = Vec::new();
            for (k, mask) in self.visible(frame) {
                let obj = &self.objects[k - 1];
                ground_truth.push(ResultRecord {
                    frame,
                    track_id: obj.class_id.code() * 1000 + k as u32,
                    class_id: obj.class_id.code(),
                    img_h: self.img_h,
                    img_w: self.img_w,
                    rle: rle_to_string(&mask),
                });

                // draws happen for every visible object so the stream does
                // not depend on which detections are dropped
                let dropped = rng.random::<f64>() < self.detector.dropout;
                let score = rng.random_range(self.detector.score_min..=self.detector.score_max);
                let shake: Vec<f64> = (0..4).map(|_| jitter.sample(&mut rng)).collect();
                let cells = self.embedding.feature_grid.map_or(1, |g| g * g);
                let mut values = Vec::with_capacity(cells * dim);
                for _ in 0..cells {
                    for c in 0..dim {
                        values.push(if c == k - 1 { 1.0 } else { 0.0 } + noise.sample(&mut rng));
                    }
                }

                if dropped || self.occlusions.iter().any(|o| o.covers(k, frame)) {
                    continue;
                }
                let b = mask.bbox().expect("visible mask is non-empty");
                let bbox = BBox::new(b.x + shake[0], b.y + shake[1], (b.w + shake[2]).max(1.0), (b.h + shake[3]).max(1.0));
                let features = match self.embedding.feature_grid {
                    None => Features::Embedding(Embedding::raw(Embedding::normalized(values).values().to_vec())),
                    Some(g) => Features::Map(FeatureMap::new(g, g, dim, values).expect("sized above")),
                };
                dets.push(Detection { frame, class_id: obj.class_id, score, bbox, mask, features });
            }
            if !dets.is_empty() {
                frames.push((frame, dets));
            }
        }
        ground_truth.sort_by_key(|r| (r.frame, r.track_id));
        Ok(Scenario { detections: DetectionSet { meta: self.meta(), frames }, ground_truth })
    }
}

/// Five objects in separate lanes: three pedestrians and two cars, all in
/// motion for the whole sequence.
fn lane_objects(frames: u32) -> Vec<ObjectSpec> {
    let ped = |x0, y0, vx, vy| ObjectSpec { class_id: ClassId::Pedestrian, width: 30, height: 70, x0, y0, vx, vy, birth: 1, death: frames };
    let car = |x0, y0, vx, vy| ObjectSpec { class_id: ClassId::Car, width: 80, height: 40, x0, y0, vx, vy, birth: 1, death: frames };
    vec![
        ped(40.0, 20.0, 2.0, 0.0),
        ped(300.0, 130.0, -1.5, 0.5),
        ped(450.0, 20.0, 1.0, 1.0),
        car(40.0, 300.0, 3.0, 0.0),
        car(520.0, 400.0, -2.0, 0.2),
    ]
}

fn base(name: &str, seed: u64, noise: f64, occlusions: Vec<Occlusion>, camera_mode: CameraMode) -> ScenarioSpec {
    let frames = 100;
    ScenarioSpec {
        name: name.to_string(),
        seed,
        frames,
        img_h: 480,
        img_w: 640,
        fps: 30.0,
        camera_mode,
        objects: lane_objects(frames),
        occlusions,
        detector: DetectorModel { dropout: 0.0, score_min: 0.8, score_max: 1.0, box_jitter: 0.0 },
        embedding: EmbeddingModel { dim: 8, noise, feature_grid: None },
    }
}

/// Clean sequence: no occlusion, dropout, jitter or embedding noise.
pub fn scenario_a() -> ScenarioSpec {
    base("scenario-a", 1, 0.0, Vec::new(), CameraMode::Static)
}

/// Short detection gaps that stay within the default termination memory
/// (6 frames for pedestrians, 3 for cars at 30 fps).
pub fn scenario_b() -> ScenarioSpec {
    let occ = |object, start, length| Occlusion { object, start, length };
    base("scenario-b", 2, 0.05, vec![occ(1, 30, 6), occ(3, 50, 4), occ(4, 40, 3)], CameraMode::Static)
}

/// Gaps longer than the termination memory but within the default
/// re-identification horizon (30 frames for pedestrians, 15 for cars).
pub fn scenario_c(camera_mode: CameraMode) -> ScenarioSpec {
    let occ = |object, start, length| Occlusion { object, start, length };
    let name = format!("scenario-c-{camera_mode}");
    base(&name, 3, 0.05, vec![occ(1, 30, 20), occ(2, 45, 12), occ(5, 60, 10)], camera_mode)
}
