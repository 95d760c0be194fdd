//! Flat-color renderings of result masks as binary PPM (P6) images.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::geometry::{rle_decode, MaskError};
use crate::io::{IoError, ResultRecord};

/// Deterministic, reasonably distinct color per track id.
pub fn track_color(track_id: u32) -> [u8; 3] {
    let h = track_id.wrapping_mul(0x9E37_79B9).rotate_left(13) ^ track_id.wrapping_mul(0x85EB_CA6B);
    let c = |shift: u32| 64 + ((h >> shift) & 0xFF) as u8 % 192;
    [c(0), c(8), c(16)]
}

/// One frame: black background, each mask filled with its track color.
pub fn render_frame(records: &[&ResultRecord], img_h: u32, img_w: u32) -> Result<Vec<u8>, MaskError> {
    let mut pixels = vec![0u8; img_h as usize * img_w as usize * 3];
    for r in records {
        let grid = rle_decode(&r.mask()?);
        if (grid.height(), grid.width()) != (img_h, img_w) {
            return Err(MaskError::ShapeMismatch(grid.height(), grid.width(), img_h, img_w));
        }
        let color = track_color(r.track_id);
        for row in 0..img_h {
            for col in 0..img_w {
                if grid.get(row, col) {
                    let i = (row as usize * img_w as usize + col as usize) * 3;
                    pixels[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }
    let mut out = format!("P6\n{img_w} {img_h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

/// Writes `frame_NNNNNN.ppm` for every frame with at least one record.
pub fn write_overlays(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let mut frames: BTreeMap<u32, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(r);
    }
    let mut written = Vec::new();
    for (frame, recs) in frames {
        let bytes = render_frame(&recs, recs[0].img_h, recs[0].img_w)?;
        let path = dir.join(format!("frame_{frame:06}.ppm"));
        std::fs::write(&path, bytes).map_err(|source| IoError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
