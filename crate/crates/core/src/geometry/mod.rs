//! Mask and box geometry.

mod bbox;
mod rle;

pub use bbox::{bbox_iou, BBox};
pub use rle::{mask_iou, rle_decode, rle_encode, rle_from_string, rle_to_string, BinaryMask, MaskError, PixelGrid};
