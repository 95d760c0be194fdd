//! Flat `key=value` configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys keep their defaults. Frame rate and camera mode are
//! properties of a sequence and come from the detection file header instead.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::postfilter::FilterConfig;
use crate::reid::ReidConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { key: String, line: usize },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    TypeError { key: String, value: String, expected: &'static str },
    #[error("key `{key}`: value {value} out of range, expected {expected}")]
    RangeError { key: String, value: String, expected: &'static str },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub tracker: TrackerConfig,
    pub reid: ReidConfig,
    pub filter: FilterConfig,
}

#[derive(Debug, Clone, Copy)]
enum Range {
    Positive,
    NonNegative,
    Unit,
    OpenUnit,
    Gate,
    AtLeast(usize),
    Any,
}

impl Range {
    fn describe(self) -> &'static str {
        match self {
            Range::Positive => "> 0",
            Range::NonNegative => ">= 0",
            Range::Unit => "in [0, 1]",
            Range::OpenUnit => "in (0, 1)",
            Range::Gate => "in (0, 3]",
            Range::AtLeast(1) => ">= 1",
            Range::AtLeast(_) => ">= 2",
            Range::Any => "any value",
        }
    }

    fn contains(self, v: f64) -> bool {
        match self {
            Range::Positive => v > 0.0,
            Range::NonNegative => v >= 0.0,
            Range::Unit => (0.0..=1.0).contains(&v),
            Range::OpenUnit => v > 0.0 && v < 1.0,
            Range::Gate => v > 0.0 && v <= 3.0,
            Range::AtLeast(n) => v >= n as f64,
            Range::Any => true,
        }
    }
}

enum Slot<'a> {
    Real(&'a mut f64),
    Count(&'a mut usize),
    Flag(&'a mut bool),
}

/// Every recognized key, in echo order.
pub const KEYS: &[&str] = &[
    "tracker.pedestrian.n1_seconds",
    "tracker.car.n1_seconds",
    "tracker.pedestrian.gate_cost",
    "tracker.car.gate_cost",
    "tracker.huber_delta",
    "tracker.huber_window",
    "tracker.str_distance_factor",
    "tracker.bank_size",
    "tracker.enable_str",
    "reid.enabled",
    "reid.pedestrian.n2_seconds",
    "reid.car.n2_seconds",
    "reid.n3_frames",
    "reid.beta1",
    "reid.beta2",
    "reid.beta3",
    "filter.min_score",
    "filter.min_box_area",
    "filter.pedestrian.aspect_min",
    "filter.pedestrian.aspect_max",
    "filter.car.aspect_min",
    "filter.car.aspect_max",
    "filter.min_track_len",
    "filter.min_track_avg_score",
    "filter.traj_iou_threshold",
];

fn slot<'a>(cfg: &'a mut Config, key: &str) -> Option<(Slot<'a>, Range)> {
    let (t, r, f) = (&mut cfg.tracker, &mut cfg.reid, &mut cfg.filter);
    Some(match key {
        "tracker.pedestrian.n1_seconds" => (Slot::Real(&mut t.pedestrian.n1_seconds), Range::Positive),
        "tracker.car.n1_seconds" => (Slot::Real(&mut t.car.n1_seconds), Range::Positive),
        "tracker.pedestrian.gate_cost" => (Slot::Real(&mut t.pedestrian.gate_cost), Range::Gate),
        "tracker.car.gate_cost" => (Slot::Real(&mut t.car.gate_cost), Range::Gate),
        "tracker.huber_delta" => (Slot::Real(&mut t.huber_delta), Range::Positive),
        "tracker.huber_window" => (Slot::Count(&mut t.huber_window), Range::AtLeast(2)),
        "tracker.str_distance_factor" => (Slot::Real(&mut t.str_distance_factor), Range::Positive),
        "tracker.bank_size" => (Slot::Count(&mut t.bank_size), Range::AtLeast(1)),
        "tracker.enable_str" => (Slot::Flag(&mut t.enable_str), Range::Any),
        "reid.enabled" => (Slot::Flag(&mut r.enabled), Range::Any),
        "reid.pedestrian.n2_seconds" => (Slot::Real(&mut r.pedestrian_n2_seconds), Range::Positive),
        "reid.car.n2_seconds" => (Slot::Real(&mut r.car_n2_seconds), Range::Positive),
        "reid.n3_frames" => (Slot::Count(&mut r.n3_frames), Range::AtLeast(2)),
        "reid.beta1" => (Slot::Real(&mut r.beta1), Range::Unit),
        "reid.beta2" => (Slot::Real(&mut r.beta2), Range::Unit),
        "reid.beta3" => (Slot::Real(&mut r.beta3), Range::OpenUnit),
        "filter.min_score" => (Slot::Real(&mut f.min_score), Range::Unit),
        "filter.min_box_area" => (Slot::Real(&mut f.min_box_area), Range::NonNegative),
        "filter.pedestrian.aspect_min" => (Slot::Real(&mut f.pedestrian_aspect.min), Range::NonNegative),
        "filter.pedestrian.aspect_max" => (Slot::Real(&mut f.pedestrian_aspect.max), Range::Positive),
        "filter.car.aspect_min" => (Slot::Real(&mut f.car_aspect.min), Range::NonNegative),
        "filter.car.aspect_max" => (Slot::Real(&mut f.car_aspect.max), Range::Positive),
        "filter.min_track_len" => (Slot::Count(&mut f.min_track_len), Range::AtLeast(1)),
        "filter.min_track_avg_score" => (Slot::Real(&mut f.min_track_avg_score), Range::Unit),
        "filter.traj_iou_threshold" => (Slot::Real(&mut f.traj_iou_threshold), Range::Unit),
        _ => return None,
    })
}

fn assign(cfg: &mut Config, key: &str, raw: &str) -> Result<(), ConfigError> {
    let (slot, range) = slot(cfg, key).expect("key checked by caller");
    let type_err = |expected| ConfigError::TypeError { key: key.to_string(), value: raw.to_string(), expected };
    let range_err = || ConfigError::RangeError { key: key.to_string(), value: raw.to_string(), expected: range.describe() };
    match slot {
        Slot::Real(dst) => {
            let v: f64 = raw.parse().map_err(|_| type_err("a real number"))?;
            if !v.is_finite() {
                return Err(type_err("a finite real number"));
            }
            if !range.contains(v) {
                return Err(range_err());
            }
            *dst = v;
        }
        Slot::Count(dst) => {
            let v: usize = raw.parse().map_err(|_| type_err("a non-negative integer"))?;
            if !range.contains(v as f64) {
                return Err(range_err());
            }
            *dst = v;
        }
        Slot::Flag(dst) => *dst = raw.parse().map_err(|_| type_err("true or false"))?,
    }
    Ok(())
}

fn check_aspect(key: &str, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if lo < hi {
        Ok(())
    } else {
        Err(ConfigError::RangeError { key: key.to_string(), value: hi.to_string(), expected: "greater than the matching aspect_min" })
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            if slot(&mut cfg, key).is_none() {
                return Err(ConfigError::UnknownKey { key: key.to_string(), line: line_no });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { key: key.to_string(), line: line_no });
            }
            assign(&mut cfg, key, value)?;
        }
        check_aspect("filter.pedestrian.aspect_max", cfg.filter.pedestrian_aspect.min, cfg.filter.pedestrian_aspect.max)?;
        check_aspect("filter.car.aspect_max", cfg.filter.car_aspect.min, cfg.filter.car_aspect.max)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key with its effective value; `parse(echo())` reproduces `self`.
    pub fn echo(&self) -> String {
        let mut scratch = self.clone();
        let mut out = String::new();
        for key in KEYS {
            let value = match slot(&mut scratch, key).expect("listed key").0 {
                Slot::Real(v) => v.to_string(),
                Slot::Count(v) => v.to_string(),
                Slot::Flag(v) => v.to_string(),
            };
            writeln!(out, "{key}={value}").unwrap();
        }
        out
    }
}
