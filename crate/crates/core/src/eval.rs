//! MOTS metrics: TP, soft TP, FP, FN, ID switches, MOTSA and sMOTSA.
//!
//! Masks are matched per frame and per class when their IOU exceeds 0.5.
//! Because masks on each side are pairwise disjoint, such a match is unique;
//! this is checked rather than assumed. An ID switch is a matched ground-truth
//! object whose hypothesis id differs from the one it was last matched to.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::geometry::{BinaryMask, MaskError};
use crate::io::ResultRecord;
use crate::tracker::ClassId;

pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("frame {frame}: image size {found:?} differs from {expected:?}")]
    DimMismatch { frame: u32, expected: (u32, u32), found: (u32, u32) },
    #[error("{side}: masks overlap in frame {frame}")]
    OverlappingMasksInInput { side: &'static str, frame: u32 },
    #[error("{side}: frame {frame} lists track {track_id} twice")]
    DuplicateTrack { side: &'static str, frame: u32, track_id: u32 },
    #[error("frame {frame}: ground-truth object {track_id} matches more than one hypothesis")]
    AmbiguousMatch { frame: u32, track_id: u32 },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counts {
    pub gt: usize,
    pub tp: usize,
    pub soft_tp: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
}

impl Counts {
    /// Without ground truth the score is 1 for an empty hypothesis set and
    /// minus the error count otherwise.
    fn normalize(&self, numerator: f64) -> f64 {
        if self.gt == 0 {
            if self.fp + self.ids == 0 {
                1.0
            } else {
                -((self.fp + self.ids) as f64)
            }
        } else {
            numerator / self.gt as f64
        }
    }

    pub fn motsa(&self) -> f64 {
        self.normalize(self.tp as f64 - self.fp as f64 - self.ids as f64)
    }

    pub fn smotsa(&self) -> f64 {
        self.normalize(self.soft_tp - self.fp as f64 - self.ids as f64)
    }

    fn add(&mut self, o: &Counts) {
        self.gt += o.gt;
        self.tp += o.tp;
        self.soft_tp += o.soft_tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ids += o.ids;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub per_class: BTreeMap<u32, Counts>,
    pub total: Counts,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>6} {:>6} {:>10} {:>6} {:>6} {:>6} {:>9} {:>9}", "class", "GT", "TP", "softTP", "FP", "FN", "IDS", "MOTSA", "sMOTSA")?;
        let mut row = |name: String, c: &Counts| {
            writeln!(
                f,
                "{:<12} {:>6} {:>6} {:>10.4} {:>6} {:>6} {:>6} {:>9.4} {:>9.4}",
                name,
                c.gt,
                c.tp,
                c.soft_tp,
                c.fp,
                c.fn_,
                c.ids,
                c.motsa(),
                c.smotsa()
            )
        };
        for (class, c) in &self.per_class {
            let name = ClassId::from_code(*class).map_or_else(|| format!("class {class}"), |c| c.name().to_string());
            row(name, c)?;
        }
        row("total".to_string(), &self.total)
    }
}

struct Entry {
    track_id: u32,
    class_id: u32,
    mask: BinaryMask,
}

fn group(records: &[ResultRecord], side: &'static str, dims: &mut Option<(u32, u32)>) -> Result<BTreeMap<u32, Vec<Entry>>, EvalError> {
    let mut frames: BTreeMap<u32, Vec<Entry>> = BTreeMap::new();
    for r in records {
        let found = (r.img_h, r.img_w);
        match dims {
            Some(expected) if *expected != found => return Err(EvalError::DimMismatch { frame: r.frame, expected: *expected, found }),
            _ => *dims = Some(found),
        }
        frames.entry(r.frame).or_default().push(Entry { track_id: r.track_id, class_id: r.class_id, mask: r.mask()? });
    }
    for (frame, entries) in &frames {
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                if a.track_id == b.track_id {
                    return Err(EvalError::DuplicateTrack { side, frame: *frame, track_id: a.track_id });
                }
                if a.mask.intersection_union(&b.mask)?.0 > 0 {
                    return Err(EvalError::OverlappingMasksInInput { side, frame: *frame });
                }
            }
        }
    }
    Ok(frames)
}

pub fn evaluate(results: &[ResultRecord], ground_truth: &[ResultRecord]) -> Result<EvalReport, EvalError> {
    let mut dims = None;
    let gt = group(ground_truth, "ground truth", &mut dims)?;
    let hyp = group(results, "results", &mut dims)?;
    let mut per_class: BTreeMap<u32, Counts> = BTreeMap::new();
    let mut last_match: HashMap<(u32, u32), u32> = HashMap::new();
    let empty = Vec::new();

    let mut frames: Vec<u32> = gt.keys().chain(hyp.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();
    for frame in frames {
        let g = gt.get(&frame).unwrap_or(&empty);
        let h = hyp.get(&frame).unwrap_or(&empty);
        let mut hyp_used = vec![false; h.len()];
        for ge in g {
            let c = per_class.entry(ge.class_id).or_default();
            c.gt += 1;
            let mut hit: Option<(usize, f64)> = None;
            for (j, he) in h.iter().enumerate() {
                if he.class_id != ge.class_id {
                    continue;
                }
                let (inter, union) = ge.mask.intersection_union(&he.mask)?;
                let iou = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
                if iou > MATCH_IOU {
                    if hit.is_some() || hyp_used[j] {
                        return Err(EvalError::AmbiguousMatch { frame, track_id: ge.track_id });
                    }
                    hit = Some((j, iou));
                }
            }
            match hit {
                Some((j, iou)) => {
                    hyp_used[j] = true;
                    c.tp += 1;
                    c.soft_tp += iou;
                    let hid = h[j].track_id;
                    if let Some(prev) = last_match.insert((ge.class_id, ge.track_id), hid) {
                        if prev != hid {
                            c.ids += 1;
                        }
                    }
                }
                None => c.fn_ += 1,
            }
        }
        for (j, he) in h.iter().enumerate() {
            if !hyp_used[j] {
                per_class.entry(he.class_id).or_default().fp += 1;
            }
        }
    }
    let mut total = Counts::default();
    for c in per_class.values() {
        total.add(c);
    }
    Ok(EvalReport { per_class, total })
}
