//! Resizing, channel fusion and PNG serialization.
//!
//! Feature planes come out of enhancement at byteplot geometry; here they are
//! brought to a common square size with a Lanczos-3 resampler, fused into one
//! RGB image, and written as PNG with pinned encoder settings so identical
//! inputs produce identical files.

use crate::raster::{GrayImage, RgbImage};
use std::f64::consts::PI;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("InvalidTarget: target {width}x{height} must be non-zero")]
    InvalidTarget { width: usize, height: usize },
    #[error("SizeMismatch: planes are {a_w}x{a_h} vs {b_w}x{b_h}")]
    SizeMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("PngError: {0}")]
    Png(String),
}

/// Which of the fused channels are kept; the rest are zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChannelMask {
    pub red: bool,
    pub green: bool,
    pub blue: bool,
}

impl Default for ChannelMask {
    fn default() -> Self {
        Self {
            red: true,
            green: true,
            blue: true,
        }
    }
}

impl FromStr for ChannelMask {
    type Err = String;

    /// Parse a subset of "rgb", e.g. "rg" keeps red and green only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mask = Self {
            red: false,
            green: false,
            blue: false,
        };
        if s.is_empty() {
            return Err("channel mask must name at least one of r, g, b".into());
        }
        for ch in s.chars() {
            match ch.to_ascii_lowercase() {
                'r' => mask.red = true,
                'g' => mask.green = true,
                'b' => mask.blue = true,
                other => return Err(format!("unknown channel '{other}' (expected r, g or b)")),
            }
        }
        Ok(mask)
    }
}

/// Fusion settings: the square target size and the channel mask.
/// The plane-to-channel assignment itself is fixed: DEX bytes land in red,
/// the decoded manifest in green, API call text in blue.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FuseConfig {
    pub target: usize,
    pub channels: ChannelMask,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            target: 256,
            channels: ChannelMask::default(),
        }
    }
}

fn lanczos3(t: f64) -> f64 {
    let t = t.abs();
    if t >= 3.0 {
        return 0.0;
    }
    if t < 1e-12 {
        return 1.0;
    }
    if t == t.trunc() {
        // Integer offsets are exact zeros of the kernel; force them so that
        // same-size resampling is the identity bit for bit.
        return 0.0;
    }
    let pt = PI * t;
    3.0 * pt.sin() * (pt / 3.0).sin() / (pt * pt)
}

/// Precomputed taps for one output coordinate.
struct Taps {
    start: isize,
    weights: Vec<f64>,
}

fn axis_taps(src: usize, dst: usize) -> Vec<Taps> {
    let ratio = src as f64 / dst as f64;
    let filter_scale = ratio.max(1.0);
    let radius = 3.0 * filter_scale;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            let start = (center - radius).ceil() as isize;
            let end = (center + radius).floor() as isize;
            let mut weights: Vec<f64> = (start..=end)
                .map(|j| lanczos3((j as f64 - center) / filter_scale))
                .collect();
            let sum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
            Taps { start, weights }
        })
        .collect()
}

/// Lanczos-3 resample to `target_w` x `target_h`.
///
/// Separable implementation with f64 intermediates; source taps outside the
/// image clamp to the edge, and values are clamped to 0..=255 and rounded
/// (halves away from zero) only at the final step.
pub fn lanczos_resize(
    img: &GrayImage,
    target_w: usize,
    target_h: usize,
) -> Result<GrayImage, FuseError> {
    if target_w == 0 || target_h == 0 {
        return Err(FuseError::InvalidTarget {
            width: target_w,
            height: target_h,
        });
    }
    let (sw, sh) = (img.width(), img.height());

    // Horizontal pass: sw x sh -> target_w x sh, kept in f64.
    let htaps = axis_taps(sw, target_w);
    let mut mid = vec![0.0f64; target_w * sh];
    for y in 0..sh {
        for (ox, taps) in htaps.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &w) in taps.weights.iter().enumerate() {
                let sx = (taps.start + k as isize).clamp(0, sw as isize - 1) as usize;
                acc += w * img.get(sx, y) as f64;
            }
            mid[y * target_w + ox] = acc;
        }
    }

    // Vertical pass: target_w x sh -> target_w x target_h.
    let vtaps = axis_taps(sh, target_h);
    let mut pixels = vec![0u8; target_w * target_h];
    for (oy, taps) in vtaps.iter().enumerate() {
        for ox in 0..target_w {
            let mut acc = 0.0;
            for (k, &w) in taps.weights.iter().enumerate() {
                let sy = (taps.start + k as isize).clamp(0, sh as isize - 1) as usize;
                acc += w * mid[sy * target_w + ox];
            }
            pixels[oy * target_w + ox] = acc.clamp(0.0, 255.0).round() as u8;
        }
    }
    Ok(GrayImage::new(target_w, target_h, pixels).expect("dims match buffer"))
}

/// Fuse three equally sized planes into RGB, zeroing masked-out channels.
pub fn merge_rgb(
    red: &GrayImage,
    green: &GrayImage,
    blue: &GrayImage,
    mask: ChannelMask,
) -> Result<RgbImage, FuseError> {
    for plane in [green, blue] {
        if plane.width() != red.width() || plane.height() != red.height() {
            return Err(FuseError::SizeMismatch {
                a_w: red.width(),
                a_h: red.height(),
                b_w: plane.width(),
                b_h: plane.height(),
            });
        }
    }
    let zero;
    let (r, g, b) = {
        let need_zero = !mask.red || !mask.green || !mask.blue;
        if need_zero {
            zero = GrayImage::zeroed(red.width(), red.height());
            (
                if mask.red { red } else { &zero },
                if mask.green { green } else { &zero },
                if mask.blue { blue } else { &zero },
            )
        } else {
            (red, green, blue)
        }
    };
    RgbImage::from_planes(r, g, b).map_err(|e| FuseError::Png(e.to_string()))
}

/// Encode as 8-bit RGB PNG with fixed encoder settings.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, FuseError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Fast);
        encoder.set_filter(png::Filter::NoFilter);
        let mut writer = encoder
            .write_header()
            .map_err(|e| FuseError::Png(e.to_string()))?;
        writer
            .write_image_data(img.data())
            .map_err(|e| FuseError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decode an 8-bit RGB PNG produced by [`encode_png`].
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, FuseError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| FuseError::Png(e.to_string()))?;
    let mut buf = vec![
        0u8;
        reader
            .output_buffer_size()
            .ok_or_else(|| FuseError::Png("image too large".into()))?
    ];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| FuseError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(FuseError::Png(format!(
            "expected 8-bit RGB, got {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    RgbImage::new(info.width as usize, info.height as usize, buf)
        .map_err(|e| FuseError::Png(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resize_rejects_zero_target() {
        let img = GrayImage::constant(4, 4, 1);
        assert!(matches!(
            lanczos_resize(&img, 0, 4),
            Err(FuseError::InvalidTarget { .. })
        ));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let pixels: Vec<u8> = (0..64).map(|i| (i * 37 % 256) as u8).collect();
        let img = GrayImage::new(8, 8, pixels).unwrap();
        let out = lanczos_resize(&img, 8, 8).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_stays_constant_across_scales() {
        let img = GrayImage::constant(7, 5, 201);
        for (tw, th) in [(256, 256), (3, 3), (7, 5), (14, 10), (1, 1)] {
            let out = lanczos_resize(&img, tw, th).unwrap();
            assert!(
                out.pixels().iter().all(|&p| p == 201),
                "{tw}x{th} broke constancy"
            );
        }
    }

    #[test]
    fn upscale_of_single_pixel() {
        let img = GrayImage::constant(1, 1, 99);
        let out = lanczos_resize(&img, 4, 4).unwrap();
        assert!(out.pixels().iter().all(|&p| p == 99));
    }

    #[test]
    fn downscale_preserves_left_right_symmetry() {
        // Mirror-symmetric source must stay mirror-symmetric after resize.
        let mut img = GrayImage::zeroed(8, 4);
        for y in 0..4 {
            for x in 0..8 {
                let d = (x as i32 - 3).min(4 - x as i32).unsigned_abs();
                img.set(x, y, (d * 60) as u8);
            }
        }
        let out = lanczos_resize(&img, 4, 2).unwrap();
        for y in 0..2 {
            for x in 0..4 {
                assert_eq!(out.get(x, y), out.get(3 - x, y));
            }
        }
    }

    #[test]
    fn mask_parsing() {
        assert_eq!(
            "rgb".parse::<ChannelMask>().unwrap(),
            ChannelMask::default()
        );
        let rg: ChannelMask = "rg".parse().unwrap();
        assert!(rg.red && rg.green && !rg.blue);
        let b: ChannelMask = "B".parse().unwrap();
        assert!(!b.red && !b.green && b.blue);
        assert!("".parse::<ChannelMask>().is_err());
        assert!("rx".parse::<ChannelMask>().is_err());
    }

    #[test]
    fn merge_checks_sizes_and_applies_mask() {
        let a = GrayImage::constant(2, 2, 10);
        let b = GrayImage::constant(2, 2, 20);
        let c = GrayImage::constant(2, 2, 30);
        let small = GrayImage::constant(1, 2, 0);
        assert!(matches!(
            merge_rgb(&a, &small, &c, ChannelMask::default()),
            Err(FuseError::SizeMismatch { .. })
        ));
        let rgb = merge_rgb(&a, &b, &c, "rb".parse().unwrap()).unwrap();
        assert_eq!(rgb.get(0, 0), [10, 0, 30]);
        assert_eq!(rgb.get(1, 1), [10, 0, 30]);
    }

    #[test]
    fn png_round_trip() {
        let data: Vec<u8> = (0..3 * 5 * 4).map(|i| (i * 11 % 256) as u8).collect();
        let img = RgbImage::new(5, 4, data).unwrap();
        let bytes = encode_png(&img).unwrap();
        let back = decode_png(&bytes).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn png_encoding_is_deterministic() {
        let data: Vec<u8> = (0..3 * 16).map(|i| (i * 29 % 256) as u8).collect();
        let img = RgbImage::new(4, 4, data).unwrap();
        assert_eq!(encode_png(&img).unwrap(), encode_png(&img).unwrap());
    }

    proptest! {
        #[test]
        fn resize_output_always_in_range(
            pixels in proptest::collection::vec(any::<u8>(), 16..64),
            tw in 1usize..12,
            th in 1usize..12,
        ) {
            let w = 4;
            let h = pixels.len() / w;
            let img = GrayImage::new(w, h, pixels[..w * h].to_vec()).unwrap();
            let out = lanczos_resize(&img, tw, th).unwrap();
            prop_assert_eq!(out.width(), tw);
            prop_assert_eq!(out.height(), th);
        }
    }
}
