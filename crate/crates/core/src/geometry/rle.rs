//! Run-length encoded binary masks.
//!
//! Pixels are visited in column-major order (row index varies fastest) and
//! runs alternate background/foreground starting with background. This is the
//! layout used by COCO and by MOTS ground-truth files, and the compressed
//! string form produced here is byte-compatible with `maskApi.c`.

use super::bbox::BBox;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask dimensions must be positive, got {height}x{width}")]
    InvalidDimensions { height: u32, width: u32 },
    #[error("run lengths sum to {actual}, expected {expected}")]
    CountsSumMismatch { expected: u64, actual: u64 },
    #[error("zero-length run at index {index}")]
    ZeroLengthRun { index: usize },
    #[error("negative run length {value} at index {index}")]
    NegativeRun { index: usize, value: i64 },
    #[error("malformed RLE token: {0}")]
    MalformedToken(String),
    #[error("mask shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(u32, u32, u32, u32),
    #[error("grid has {actual} cells, expected {expected}")]
    GridSizeMismatch { expected: usize, actual: usize },
}

/// Dense binary image, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    height: u32,
    width: u32,
    data: Vec<bool>,
}

impl PixelGrid {
    pub fn zeros(height: u32, width: u32) -> Self {
        Self { height, width, data: vec![false; height as usize * width as usize] }
    }

    pub fn from_rows(height: u32, width: u32, data: Vec<bool>) -> Result<Self, MaskError> {
        let expected = height as usize * width as usize;
        if data.len() != expected {
            return Err(MaskError::GridSizeMismatch { expected, actual: data.len() });
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        self.data[row as usize * self.width as usize + col as usize] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Accumulates alternating runs, merging repeats and dropping empty runs so
/// the result is always canonical.
#[derive(Debug, Default)]
struct RunBuilder {
    counts: Vec<u32>,
}

impl RunBuilder {
    fn push(&mut self, foreground: bool, len: u32) {
        if len == 0 {
            return;
        }
        if self.counts.is_empty() && foreground {
            self.counts.push(0);
        }
        // odd slots hold foreground runs
        let last_is_fg = self.counts.len() % 2 == 0;
        match self.counts.last_mut() {
            Some(last) if *last > 0 && last_is_fg == foreground => *last += len,
            _ => self.counts.push(len),
        }
    }

    fn finish(self) -> Vec<u32> {
        self.counts
    }
}

/// Binary instance mask in canonical column-major RLE form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    counts: Vec<u32>,
}

impl BinaryMask {
    /// Builds a mask from raw run lengths, validating the canonical-form
    /// invariants.
    pub fn new(height: u32, width: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::InvalidDimensions { height, width });
        }
        let expected = height as u64 * width as u64;
        let actual: u64 = counts.iter().map(|&c| c as u64).sum();
        if actual != expected {
            return Err(MaskError::CountsSumMismatch { expected, actual });
        }
        if let Some(index) = counts.iter().enumerate().skip(1).find(|(_, &c)| c == 0).map(|(i, _)| i) {
            return Err(MaskError::ZeroLengthRun { index });
        }
        Ok(Self { height, width, counts })
    }

    pub fn empty(height: u32, width: u32) -> Result<Self, MaskError> {
        Self::new(height, width, vec![height * width])
    }

    /// Axis-aligned rectangle of foreground clipped to the image.
    /// `col0`/`row0` may be negative; pixels outside the image are dropped.
    pub fn from_rect(height: u32, width: u32, col0: i64, row0: i64, cols: u32, rows: u32) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::InvalidDimensions { height, width });
        }
        let c_lo = col0.clamp(0, width as i64) as u32;
        let c_hi = (col0 + cols as i64).clamp(0, width as i64) as u32;
        let r_lo = row0.clamp(0, height as i64) as u32;
        let r_hi = (row0 + rows as i64).clamp(0, height as i64) as u32;
        let mut b = RunBuilder::default();
        if c_lo >= c_hi || r_lo >= r_hi {
            b.push(false, height * width);
        } else {
            b.push(false, c_lo * height);
            for _ in c_lo..c_hi {
                b.push(false, r_lo);
                b.push(true, r_hi - r_lo);
                b.push(false, height - r_hi);
            }
            b.push(false, (width - c_hi) * height);
        }
        Ok(Self { height, width, counts: b.finish() })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of foreground pixels (sum of odd-indexed runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    fn check_shape(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.height != other.height || self.width != other.width {
            return Err(MaskError::ShapeMismatch(self.height, self.width, other.height, other.width));
        }
        Ok(())
    }

    /// Walks both run lists in lockstep, calling `f(a_fg, b_fg, len)` for
    /// each maximal segment where both masks are constant.
    fn zip_runs(&self, other: &BinaryMask, mut f: impl FnMut(bool, bool, u32)) {
        let (mut ia, mut ib) = (0usize, 0usize);
        let (mut ra, mut rb) = (0u32, 0u32);
        loop {
            while ra == 0 && ia < self.counts.len() {
                ra = self.counts[ia];
                ia += 1;
            }
            while rb == 0 && ib < other.counts.len() {
                rb = other.counts[ib];
                ib += 1;
            }
            if ra == 0 || rb == 0 {
                break;
            }
            let step = ra.min(rb);
            // run index ia-1 is foreground when odd
            f(ia % 2 == 0, ib % 2 == 0, step);
            ra -= step;
            rb -= step;
        }
    }

    /// Foreground pixel counts of the intersection and union.
    pub fn intersection_union(&self, other: &BinaryMask) -> Result<(u64, u64), MaskError> {
        self.check_shape(other)?;
        let (mut inter, mut union) = (0u64, 0u64);
        self.zip_runs(other, |a, b, len| {
            if a && b {
                inter += len as u64;
            }
            if a || b {
                union += len as u64;
            }
        });
        Ok((inter, union))
    }

    fn combine(&self, other: &BinaryMask, op: impl Fn(bool, bool) -> bool) -> Result<BinaryMask, MaskError> {
        self.check_shape(other)?;
        let mut b = RunBuilder::default();
        self.zip_runs(other, |x, y, len| b.push(op(x, y), len));
        Ok(BinaryMask { height: self.height, width: self.width, counts: b.finish() })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.combine(other, |a, b| a && b)
    }

    /// Pixels of `self` not covered by `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.combine(other, |a, b| a && !b)
    }

    /// Tight bounding box of the foreground, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let h = self.height as u64;
        let (mut c_lo, mut c_hi, mut r_lo, mut r_hi) = (u64::MAX, 0u64, u64::MAX, 0u64);
        let mut pos = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            let len = c as u64;
            if i % 2 == 1 && len > 0 {
                let first = pos;
                let last = pos + len - 1;
                let (fc, fr) = (first / h, first % h);
                let (lc, lr) = (last / h, last % h);
                c_lo = c_lo.min(fc);
                c_hi = c_hi.max(lc);
                if fc == lc {
                    r_lo = r_lo.min(fr);
                    r_hi = r_hi.max(lr);
                } else {
                    // spans a column boundary: touches both the top and bottom rows
                    r_lo = 0;
                    r_hi = h - 1;
                }
            }
            pos += len;
        }
        if c_lo == u64::MAX {
            return None;
        }
        Some(BBox::new(c_lo as f64, r_lo as f64, (c_hi - c_lo + 1) as f64, (r_hi - r_lo + 1) as f64))
    }
}

/// Expands a mask into a dense pixel grid.
pub fn rle_decode(mask: &BinaryMask) -> PixelGrid {
    let h = mask.height as usize;
    let mut grid = PixelGrid::zeros(mask.height, mask.width);
    let mut pos = 0usize;
    for (i, &c) in mask.counts.iter().enumerate() {
        if i % 2 == 1 {
            for k in pos..pos + c as usize {
                grid.set((k % h) as u32, (k / h) as u32, true);
            }
        }
        pos += c as usize;
    }
    grid
}

/// Compresses a dense grid into canonical RLE.
pub fn rle_encode(grid: &PixelGrid) -> BinaryMask {
    let mut b = RunBuilder::default();
    for col in 0..grid.width {
        for row in 0..grid.height {
            b.push(grid.get(row, col), 1);
        }
    }
    let mut counts = b.finish();
    if counts.is_empty() {
        counts.push(0);
    }
    BinaryMask { height: grid.height, width: grid.width, counts }
}

/// COCO compressed string form of the run lengths.
pub fn rle_to_string(mask: &BinaryMask) -> String {
    let mut out = String::with_capacity(mask.counts.len() * 2);
    for (i, &c) in mask.counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= mask.counts[i - 2] as i64;
        }
        loop {
            let mut ch = (x & 0x1f) as u8;
            x >>= 5;
            let more = if ch & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                ch |= 0x20;
            }
            out.push((ch + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Parses a COCO compressed string into a mask of the given size.
pub fn rle_from_string(token: &str, height: u32, width: u32) -> Result<BinaryMask, MaskError> {
    let bytes = token.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            let Some(&byte) = bytes.get(p) else {
                return Err(MaskError::MalformedToken(format!("truncated value at byte {p}")));
            };
            if !(48..48 + 64).contains(&byte) {
                return Err(MaskError::MalformedToken(format!("invalid character {:?} at byte {p}", byte as char)));
            }
            if k >= 12 {
                return Err(MaskError::MalformedToken(format!("value too long at byte {p}")));
            }
            let c = (byte - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let index = counts.len();
        if index > 2 {
            x += counts[index - 2] as i64;
        }
        if !(0..=u32::MAX as i64).contains(&x) {
            return Err(MaskError::NegativeRun { index, value: x });
        }
        counts.push(x as u32);
    }
    BinaryMask::new(height, width, counts)
}

/// Mask intersection over union computed on runs. Empty union gives 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    let (inter, union) = a.intersection_union(b)?;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}
