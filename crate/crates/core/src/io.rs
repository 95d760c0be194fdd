//! Detection input (JSON lines) and MOTS result text files.
//!
//! A detection file starts with one header object describing the sequence,
//! followed by one object per detection:
//!
//! ```text
//! {"name":"seq","fps":30.0,"img_h":480,"img_w":640,"camera_mode":"static"}
//! {"frame":1,"class_id":2,"score":0.9,"bbox":[10,20,30,60],"mask":{"h":480,"w":640,"counts":"..."},"embedding":[...]}
//! ```
//!
//! Instead of `embedding` a record may carry
//! `"feature_map":{"gh":7,"gw":7,"c":64,"values":[...]}` (row, column, channel
//! order). Result files hold one mask per line,
//! `frame track_id class_id img_h img_w rle`, with `#` comment lines allowed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{Embedding, FeatureMap};
use crate::geometry::{rle_from_string, rle_to_string, BBox, BinaryMask, MaskError};
use crate::reid::{CameraMode, Tracklet};
use crate::tracker::{ClassId, Detection, Features};

pub const RESULTS_HEADER: &str = "# frame track_id class_id img_h img_w rle";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: mask does not match its dimensions: {message}")]
    MaskDimMismatch { line: usize, message: String },
    #[error("line {line}: record has neither embedding nor feature_map")]
    MissingFeatures { line: usize },
    #[error("frame {frame}: masks still overlap after resolution")]
    OverlapAfterResolution { frame: u32 },
    #[error("track serial {serial} does not fit the class*1000+serial id scheme")]
    IdOverflow { serial: u32 },
    #[error("frame {frame}: track id {track_id} appears twice")]
    DuplicateRecord { frame: u32, track_id: u32 },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceMeta {
    pub name: String,
    pub fps: f64,
    pub img_h: u32,
    pub img_w: u32,
    pub camera_mode: CameraMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRecord {
    h: u32,
    w: u32,
    counts: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureMapRecord {
    gh: usize,
    gw: usize,
    c: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    frame: u32,
    class_id: u32,
    score: f64,
    bbox: [f64; 4],
    mask: MaskRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_map: Option<FeatureMapRecord>,
}

/// Detections of one sequence, grouped by frame in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub meta: SequenceMeta,
    pub frames: Vec<(u32, Vec<Detection>)>,
}

impl DetectionSet {
    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|(_, d)| d.len()).sum()
    }
}

fn parse_err(line: usize, message: impl ToString) -> IoError {
    IoError::ParseError { line, message: message.to_string() }
}

fn parse_detection(line: usize, text: &str, meta: &SequenceMeta) -> Result<Detection, IoError> {
    let rec: DetectionRecord = serde_json::from_str(text).map_err(|e| parse_err(line, e))?;
    let class_id = ClassId::from_code(rec.class_id).ok_or_else(|| parse_err(line, format!("unknown class_id {}", rec.class_id)))?;
    if !(rec.score.is_finite() && (0.0..=1.0).contains(&rec.score)) {
        return Err(parse_err(line, "score must be in [0, 1]"));
    }
    let bbox = BBox::new(rec.bbox[0], rec.bbox[1], rec.bbox[2], rec.bbox[3]);
    if !bbox.is_valid() {
        return Err(parse_err(line, "invalid bbox"));
    }
    if (rec.mask.h, rec.mask.w) != (meta.img_h, meta.img_w) {
        return Err(IoError::MaskDimMismatch {
            line,
            message: format!("{}x{} mask in a {}x{} sequence", rec.mask.h, rec.mask.w, meta.img_h, meta.img_w),
        });
    }
    let mask = rle_from_string(&rec.mask.counts, rec.mask.h, rec.mask.w).map_err(|e| match e {
        MaskError::MalformedToken(_) | MaskError::NegativeRun { .. } => parse_err(line, e),
        other => IoError::MaskDimMismatch { line, message: other.to_string() },
    })?;
    let features = match (rec.embedding, rec.feature_map) {
        (Some(_), Some(_)) => return Err(parse_err(line, "record has both embedding and feature_map")),
        (Some(values), None) => {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(line, "embedding must be non-empty and finite"));
            }
            Features::Embedding(Embedding::raw(values))
        }
        (None, Some(fm)) => Features::Map(FeatureMap::new(fm.gh, fm.gw, fm.c, fm.values).map_err(|e| parse_err(line, e))?),
        (None, None) => return Err(IoError::MissingFeatures { line }),
    };
    Ok(Detection { frame: rec.frame, class_id, score: rec.score, bbox, mask, features })
}

pub fn parse_detections(text: &str) -> Result<DetectionSet, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing sequence header"))?;
    let meta: SequenceMeta = serde_json::from_str(header).map_err(|e| parse_err(hline, e))?;
    if !(meta.fps > 0.0 && meta.fps.is_finite()) || meta.img_h == 0 || meta.img_w == 0 {
        return Err(parse_err(hline, "fps and image dimensions must be positive"));
    }
    let mut by_frame: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (line, text) in lines {
        let det = parse_detection(line, text, &meta)?;
        by_frame.entry(det.frame).or_default().push(det);
    }
    Ok(DetectionSet { meta, frames: by_frame.into_iter().collect() })
}

pub fn load_detections(path: &Path) -> Result<DetectionSet, IoError> {
    parse_detections(&read_file(path)?)
}

fn detection_record(det: &Detection) -> DetectionRecord {
    let (embedding, feature_map) = match &det.features {
        Features::Embedding(e) => (Some(e.values().to_vec()), None),
        Features::Map(m) => (None, Some(FeatureMapRecord { gh: m.grid_h(), gw: m.grid_w(), c: m.channels(), values: m.values().to_vec() })),
    };
    DetectionRecord {
        frame: det.frame,
        class_id: det.class_id.code(),
        score: det.score,
        bbox: [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
        mask: MaskRecord { h: det.mask.height(), w: det.mask.width(), counts: rle_to_string(&det.mask) },
        embedding,
        feature_map,
    }
}

pub fn format_detections(set: &DetectionSet) -> String {
    let mut out = serde_json::to_string(&set.meta).expect("meta serializes");
    out.push('\n');
    for (_, dets) in &set.frames {
        for det in dets {
            out.push_str(&serde_json::to_string(&detection_record(det)).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn write_detections(set: &DetectionSet, path: &Path) -> Result<(), IoError> {
    write_file(path, &format_detections(set))
}

/// One line of a MOTS result or ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRecord {
    pub frame: u32,
    pub track_id: u32,
    pub class_id: u32,
    pub img_h: u32,
    pub img_w: u32,
    pub rle: String,
}

impl ResultRecord {
    pub fn mask(&self) -> Result<BinaryMask, MaskError> {
        rle_from_string(&self.rle, self.img_h, self.img_w)
    }
}

/// Turns finished tracklets into result records. Within a frame, tracks are
/// taken in ascending id order and each mask loses the pixels already claimed
/// by lower ids; masks left empty are dropped.
pub fn records_from_tracklets(tracklets: &[Tracklet]) -> Result<Vec<ResultRecord>, IoError> {
    let mut by_frame: BTreeMap<u32, Vec<(u32, ClassId, &BinaryMask)>> = BTreeMap::new();
    for t in tracklets {
        if t.id.serial >= 1000 {
            return Err(IoError::IdOverflow { serial: t.id.serial });
        }
        for obs in t.observations() {
            by_frame.entry(obs.frame).or_default().push((t.id.mots_id(), t.class_id(), &obs.mask));
        }
    }
    let mut records = Vec::new();
    for (frame, mut entries) in by_frame {
        entries.sort_by_key(|e| e.0);
        let mut claimed: Option<BinaryMask> = None;
        let mut kept: Vec<BinaryMask> = Vec::new();
        for (i, (id, class_id, mask)) in entries.iter().enumerate() {
            if i > 0 && entries[i - 1].0 == *id {
                return Err(IoError::DuplicateRecord { frame, track_id: *id });
            }
            let own = match &claimed {
                Some(c) => mask.difference(c)?,
                None => (*mask).clone(),
            };
            claimed = Some(match claimed {
                Some(c) => c.union(mask)?,
                None => (*mask).clone(),
            });
            if own.is_empty() {
                continue;
            }
            if kept.iter().any(|k| k.intersection_union(&own).map(|(i, _)| i > 0).unwrap_or(true)) {
                return Err(IoError::OverlapAfterResolution { frame });
            }
            records.push(ResultRecord {
                frame,
                track_id: *id,
                class_id: class_id.code(),
                img_h: own.height(),
                img_w: own.width(),
                rle: rle_to_string(&own),
            });
            kept.push(own);
        }
    }
    Ok(records)
}

pub fn format_results(records: &[ResultRecord]) -> String {
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.track_id));
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in sorted {
        writeln!(out, "{} {} {} {} {} {}", r.frame, r.track_id, r.class_id, r.img_h, r.img_w, r.rle).unwrap();
    }
    out
}

pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<(), IoError> {
    write_file(path, &format_results(records))
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRecord>, IoError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(line_no, format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |k: usize, name: &str| fields[k].parse::<u32>().map_err(|_| parse_err(line_no, format!("bad {name} `{}`", fields[k])));
        let rec = ResultRecord {
            frame: num(0, "frame")?,
            track_id: num(1, "track_id")?,
            class_id: num(2, "class_id")?,
            img_h: num(3, "img_h")?,
            img_w: num(4, "img_w")?,
            rle: fields[5].to_string(),
        };
        rec.mask().map_err(|e| match e {
            MaskError::MalformedToken(_) | MaskError::NegativeRun { .. } => parse_err(line_no, e),
            other => IoError::MaskDimMismatch { line: line_no, message: other.to_string() },
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, IoError> {
    parse_results(&read_file(path)?)
}
