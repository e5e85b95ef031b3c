//! Byte-to-grayscale plotting: lay a raw byte stream out row-major as an
//! 8-bit image, picking the row width from the payload size.

use crate::raster::GrayImage;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ByteplotError {
    #[error("EmptyInput: cannot plot zero bytes")]
    EmptyInput,
}

/// Size-bucketed row widths. Thresholds are in kilobytes (1 KB = 1024 bytes)
/// and each bucket is "strictly below threshold -> width".
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct WidthTable {
    /// (exclusive upper bound in bytes, width) pairs, ascending.
    buckets: Vec<(usize, usize)>,
    /// Width used at or above the last bound.
    fallback: usize,
}

impl Default for WidthTable {
    fn default() -> Self {
        const KB: usize = 1024;
        Self {
            buckets: vec![
                (10 * KB, 32),
                (30 * KB, 64),
                (60 * KB, 128),
                (100 * KB, 256),
                (200 * KB, 384),
                (500 * KB, 512),
                (1000 * KB, 768),
            ],
            fallback: 1024,
        }
    }
}

impl WidthTable {
    pub fn width_for(&self, len: usize) -> usize {
        for &(bound, width) in &self.buckets {
            if len < bound {
                return width;
            }
        }
        self.fallback
    }
}

/// Plot `bytes` as a grayscale image using the default width table.
/// Height is the row count needed to hold every byte; the final row is
/// zero-padded.
pub fn bytes_to_gray(bytes: &[u8]) -> Result<GrayImage, ByteplotError> {
    bytes_to_gray_with(bytes, &WidthTable::default())
}

pub fn bytes_to_gray_with(bytes: &[u8], table: &WidthTable) -> Result<GrayImage, ByteplotError> {
    bytes_to_gray_forced(bytes, table.width_for(bytes.len()))
}

/// Plot with an explicit width, bypassing the table.
pub fn bytes_to_gray_forced(bytes: &[u8], width: usize) -> Result<GrayImage, ByteplotError> {
    if bytes.is_empty() {
        return Err(ByteplotError::EmptyInput);
    }
    assert!(width > 0, "width must be positive");
    let height = bytes.len().div_ceil(width);
    let mut pixels = vec![0u8; width * height];
    pixels[..bytes.len()].copy_from_slice(bytes);
    Ok(GrayImage::new(width, height, pixels).expect("dims derived from len"))
}
