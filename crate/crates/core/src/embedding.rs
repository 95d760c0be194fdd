//! Instance-aware appearance embeddings.
//!
//! A detector supplies a box-aligned feature map per detection. The instance
//! mask is resampled onto the feature grid as a two-level attention map
//! (foreground 1.0, background 0.5), the map is pooled under that attention
//! and L2-normalized. Tracks keep a small bank of these vectors and compare
//! against new detections by the best pairwise cosine similarity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, BinaryMask};

pub const FOREGROUND_WEIGHT: f64 = 1.0;
pub const BACKGROUND_WEIGHT: f64 = 0.5;
/// Entries kept at each end of a feature bank.
pub const DEFAULT_BANK_SIZE: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("box has zero area")]
    EmptyBox,
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("feature map is {fmap_h}x{fmap_w} but attention is {attn_h}x{attn_w}")]
    ShapeMismatch { fmap_h: usize, fmap_w: usize, attn_h: usize, attn_w: usize },
    #[error("feature map needs {expected} values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("feature bank is empty")]
    EmptyBank,
    #[error("frame {frame} is not after the last banked frame {last}")]
    NonMonotonicFrame { frame: u32, last: u32 },
}

/// Box-aligned spatial features, laid out as `[row][col][channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    grid_h: usize,
    grid_w: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(grid_h: usize, grid_w: usize, channels: usize, values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if grid_h == 0 || grid_w == 0 || channels == 0 {
            return Err(EmbeddingError::EmptyGrid);
        }
        let expected = grid_h * grid_w * channels;
        if values.len() != expected {
            return Err(EmbeddingError::ValueCount { expected, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self { grid_h, grid_w, channels, values })
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.grid_w + col) * self.channels;
        &self.values[start..start + self.channels]
    }
}

/// Per-cell weights, each either [`FOREGROUND_WEIGHT`] or [`BACKGROUND_WEIGHT`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    grid_h: usize,
    grid_w: usize,
    weights: Vec<f64>,
}

impl AttentionMap {
    pub fn uniform(grid_h: usize, grid_w: usize) -> Self {
        Self { grid_h, grid_w, weights: vec![FOREGROUND_WEIGHT; grid_h * grid_w] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.grid_w + col]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }
}

/// Appearance vector. `normalized` is false only when the vector could not be
/// scaled to unit length (all zeros) or was supplied raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
    normalized: bool,
}

impl Embedding {
    pub fn raw(values: Vec<f64>) -> Self {
        Self { values, normalized: false }
    }

    /// Scales to unit L2 norm. A zero vector is returned unchanged and
    /// flagged as not normalized.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            Self { values: values.into_iter().map(|v| v / norm).collect(), normalized: true }
        } else {
            Self { values, normalized: false }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Resamples the part of `mask` under `bbox` onto a `grid_h x grid_w` grid by
/// nearest neighbour (cell centres) and assigns foreground/background weights.
/// Cells whose sample falls outside the image count as background.
pub fn spatial_attention(mask: &BinaryMask, bbox: &BBox, grid_h: usize, grid_w: usize) -> Result<AttentionMap, EmbeddingError> {
    if bbox.is_degenerate() {
        return Err(EmbeddingError::EmptyBox);
    }
    if grid_h == 0 || grid_w == 0 {
        return Err(EmbeddingError::EmptyGrid);
    }
    let grid = crate::geometry::rle_decode(mask);
    let (img_h, img_w) = (mask.height() as f64, mask.width() as f64);
    let mut weights = Vec::with_capacity(grid_h * grid_w);
    for i in 0..grid_h {
        let py = (bbox.y + (i as f64 + 0.5) * bbox.h / grid_h as f64).floor();
        for j in 0..grid_w {
            let px = (bbox.x + (j as f64 + 0.5) * bbox.w / grid_w as f64).floor();
            let inside = py >= 0.0 && px >= 0.0 && py < img_h && px < img_w;
            let fg = inside && grid.get(py as u32, px as u32);
            weights.push(if fg { FOREGROUND_WEIGHT } else { BACKGROUND_WEIGHT });
        }
    }
    Ok(AttentionMap { grid_h, grid_w, weights })
}

/// Attention-weighted mean over grid cells, per channel, before normalization.
pub fn weighted_pool(fmap: &FeatureMap, attn: &AttentionMap) -> Result<Vec<f64>, EmbeddingError> {
    if fmap.grid_h != attn.grid_h || fmap.grid_w != attn.grid_w {
        return Err(EmbeddingError::ShapeMismatch {
            fmap_h: fmap.grid_h,
            fmap_w: fmap.grid_w,
            attn_h: attn.grid_h,
            attn_w: attn.grid_w,
        });
    }
    let mut acc = vec![0.0; fmap.channels];
    let mut total = 0.0;
    for i in 0..fmap.grid_h {
        for j in 0..fmap.grid_w {
            let w = attn.get(i, j);
            total += w;
            for (a, v) in acc.iter_mut().zip(fmap.cell(i, j)) {
                *a += w * v;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// Instance-aware embedding: attention-weighted pooling followed by L2
/// normalization.
pub fn instance_aware_pool(fmap: &FeatureMap, attn: &AttentionMap) -> Result<Embedding, EmbeddingError> {
    weighted_pool(fmap, attn).map(Embedding::normalized)
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    cosine(a.values(), b.values())
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Per-track store of embeddings from the earliest and the most recent
/// matched frames. Entries are never averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    capacity: usize,
    head: Vec<(u32, Embedding)>,
    tail: VecDeque<(u32, Embedding)>,
}

impl Default for FeatureBank {
    fn default() -> Self {
        Self::new(DEFAULT_BANK_SIZE)
    }
}

impl FeatureBank {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), head: Vec::new(), tail: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn head(&self) -> &[(u32, Embedding)] {
        &self.head
    }

    pub fn tail(&self) -> impl Iterator<Item = &(u32, Embedding)> {
        self.tail.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_empty() && self.tail.is_empty()
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.tail.back().map(|(f, _)| *f)
    }

    /// All banked embeddings, head first. Short tracks appear in both halves.
    pub fn entries(&self) -> impl Iterator<Item = &Embedding> {
        self.head.iter().chain(self.tail.iter()).map(|(_, e)| e)
    }

    pub fn update(&mut self, embedding: Embedding, frame: u32) -> Result<(), EmbeddingError> {
        if let Some(last) = self.last_frame() {
            if frame <= last {
                return Err(EmbeddingError::NonMonotonicFrame { frame, last });
            }
        }
        if self.head.len() < self.capacity {
            self.head.push((frame, embedding.clone()));
        }
        self.tail.push_back((frame, embedding));
        while self.tail.len() > self.capacity {
            self.tail.pop_front();
        }
        Ok(())
    }

    /// Best cosine similarity between any banked entry and `query`.
    pub fn similarity(&self, query: &Embedding) -> Result<f64, EmbeddingError> {
        let mut best: Option<f64> = None;
        for e in self.entries() {
            let s = cosine_similarity(e, query)?;
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
        best.ok_or(EmbeddingError::EmptyBank)
    }

    /// Best pairwise similarity between the entries of two banks.
    pub fn cross_similarity(&self, other: &FeatureBank) -> Result<f64, EmbeddingError> {
        let mut best: Option<f64> = None;
        for e in self.entries() {
            let s = other.similarity(e)?;
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
        best.ok_or(EmbeddingError::EmptyBank)
    }
}

pub fn bank_similarity(bank: &FeatureBank, query: &Embedding) -> Result<f64, EmbeddingError> {
    bank.similarity(query)
}
