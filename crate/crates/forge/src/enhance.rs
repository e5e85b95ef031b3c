//! Channel enhancement kernels: Canny edges, histogram equalization and
//! Gaussian adaptive thresholding.
//!
//! All three are written against fixed arithmetic rules (integer Gaussian
//! smoothing, integer rounding for the equalization map) so that the same
//! input bytes produce the same output bytes on every platform.

use crate::raster::GrayImage;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnhanceError {
    #[error("InvalidThresholds: low {low} must be less than high {high}")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("InvalidBlockSize: block {block} must be odd and at least 3")]
    InvalidBlockSize { block: usize },
}

/// Which enhancement runs on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enhancement {
    Canny,
    HistEq,
    AdaptiveThreshold,
}

/// Tunables for the kernels, with the defaults the pipeline ships.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EnhanceConfig {
    pub canny_low: f64,
    pub canny_high: f64,
    pub adaptive_block: usize,
    pub adaptive_c: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            canny_low: 100.0,
            canny_high: 200.0,
            adaptive_block: 11,
            adaptive_c: 2.0,
        }
    }
}

impl Enhancement {
    /// Run this enhancement with `cfg`'s parameters. Returns the enhanced
    /// plane plus any non-fatal warnings (e.g. block-size degradation).
    pub fn apply(
        self,
        img: &GrayImage,
        cfg: &EnhanceConfig,
    ) -> Result<(GrayImage, Vec<String>), EnhanceError> {
        match self {
            Enhancement::Canny => canny(img, cfg.canny_low, cfg.canny_high).map(|i| (i, vec![])),
            Enhancement::HistEq => Ok((equalize_hist(img), vec![])),
            Enhancement::AdaptiveThreshold => {
                adaptive_threshold(img, cfg.adaptive_block, cfg.adaptive_c)
            }
        }
    }

    /// True for enhancements whose output is strictly two-valued {0, 255}.
    pub fn is_binary(self) -> bool {
        matches!(self, Enhancement::Canny | Enhancement::AdaptiveThreshold)
    }
}

// 5x5 Gaussian (sigma ~= 1.4) as integers over a common denominator of 159.
const GAUSS_5X5: [[u32; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
const GAUSS_DEN: u32 = 159;

fn gaussian_blur_5x5(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = GrayImage::zeroed(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut num: u32 = 0;
            for (ky, row) in GAUSS_5X5.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    let sx = x as isize + kx as isize - 2;
                    let sy = y as isize + ky as isize - 2;
                    num += k * img.get_clamped(sx, sy) as u32;
                }
            }
            // Round half away from zero; everything here is non-negative.
            let v = (2 * num + GAUSS_DEN) / (2 * GAUSS_DEN);
            out.set(x, y, v as u8);
        }
    }
    out
}

fn sobel_3x3(img: &GrayImage) -> (Vec<i32>, Vec<i32>) {
    const SX: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    const SY: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut ax, mut ay) = (0i32, 0i32);
            for ky in 0..3 {
                for kx in 0..3 {
                    let p = img.get_clamped(x as isize + kx as isize - 1, y as isize + ky as isize - 1)
                        as i32;
                    ax += SX[ky][kx] * p;
                    ay += SY[ky][kx] * p;
                }
            }
            gx[y * w + x] = ax;
            gy[y * w + x] = ay;
        }
    }
    (gx, gy)
}

// tan(22.5 deg) and tan(67.5 deg): the gradient-direction bin boundaries.
const TAN_22_5: f64 = 0.414_213_562_373_095_1;
const TAN_67_5: f64 = 2.414_213_562_373_095;

/// Canny edge detector. Output pixels are 0 or 255.
///
/// Stages: integer 5x5 Gaussian smoothing, 3x3 Sobel gradients,
/// four-direction non-maximum suppression (out-of-image neighbours count as
/// magnitude zero), double thresholding, and hysteresis over 8-connected
/// components seeded from strong pixels.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> Result<GrayImage, EnhanceError> {
    if !low.is_finite() || !high.is_finite() || low >= high {
        return Err(EnhanceError::InvalidThresholds { low, high });
    }
    let (w, h) = (img.width(), img.height());
    let blurred = gaussian_blur_5x5(img);
    let (gx, gy) = sobel_3x3(&blurred);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| ((x as f64).powi(2) + (y as f64).powi(2)).sqrt())
        .collect();

    let mag_at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    let mut nms = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let ax = (gx[i] as f64).abs();
            let ay = (gy[i] as f64).abs();
            // Pick the two neighbours along the gradient direction without
            // ever calling atan2: compare |gy|/|gx| against the bin edges.
            let (dx, dy) = if ay < ax * TAN_22_5 {
                (1isize, 0isize)
            } else if ay >= ax * TAN_67_5 {
                (0, 1)
            } else if (gx[i] as i64) * (gy[i] as i64) > 0 {
                (1, 1)
            } else {
                (1, -1)
            };
            let n1 = mag_at(x as isize + dx, y as isize + dy);
            let n2 = mag_at(x as isize - dx, y as isize - dy);
            if m >= n1 && m >= n2 {
                nms[i] = m;
            }
        }
    }

    let mut out = GrayImage::zeroed(w, h);
    let mut state = vec![0u8; w * h]; // 0 = none, 1 = weak, 2 = edge
    let mut stack = Vec::new();
    for (i, &m) in nms.iter().enumerate() {
        if m >= high {
            state[i] = 2;
            stack.push(i);
        } else if m >= low {
            state[i] = 1;
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if state[j] == 1 {
                    state[j] = 2;
                    stack.push(j);
                }
            }
        }
    }
    for (i, &s) in state.iter().enumerate() {
        if s == 2 {
            out.set(i % w, i / w, 255);
        }
    }
    Ok(out)
}

/// Histogram equalization over the full 0..=255 range.
///
/// Uses the cumulative distribution with the lowest occupied bin as the
/// floor: `map(v) = round((cdf(v) - cdf_min) * 255 / (n - cdf_min))`, halves
/// rounding up. A constant image maps to itself.
pub fn equalize_hist(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let n = img.pixels().len() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0u64;
    for (i, &c) in hist.iter().enumerate() {
        acc += c;
        cdf[i] = acc;
    }
    let cdf_min = hist
        .iter()
        .position(|&c| c > 0)
        .map(|i| cdf[i])
        .unwrap_or(0);
    let denom = n - cdf_min;
    if denom == 0 {
        return img.clone();
    }
    let mut lut = [0u8; 256];
    for v in 0..256 {
        let a = cdf[v].saturating_sub(cdf_min);
        let mapped = (2 * 255 * a + denom) / (2 * denom);
        lut[v] = mapped.min(255) as u8;
    }
    let pixels = img.pixels().iter().map(|&p| lut[p as usize]).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dims")
}

/// Gaussian-weighted adaptive threshold. Output pixels are 0 or 255.
///
/// Each pixel is compared against the Gaussian-weighted mean of its
/// `block` x `block` neighbourhood minus `c`; strictly greater becomes 255.
/// The Gaussian sigma follows `0.3 * ((block - 1) / 2 - 1) + 0.8`. When the
/// block does not fit in the image the threshold degrades to the global mean
/// and a warning is reported.
pub fn adaptive_threshold(
    img: &GrayImage,
    block: usize,
    c: f64,
) -> Result<(GrayImage, Vec<String>), EnhanceError> {
    if block < 3 || block.is_multiple_of(2) {
        return Err(EnhanceError::InvalidBlockSize { block });
    }
    let (w, h) = (img.width(), img.height());
    let mut warnings = Vec::new();

    if block > w.min(h) {
        warnings.push(format!(
            "BlockTooLarge: block {} exceeds image {}x{}; using global mean threshold",
            block, w, h
        ));
        let sum: f64 = img.pixels().iter().map(|&p| p as f64).sum();
        let mean = sum / (w * h) as f64;
        let t = mean - c;
        let pixels = img
            .pixels()
            .iter()
            .map(|&p| if (p as f64) > t { 255 } else { 0 })
            .collect();
        let out = GrayImage::new(w, h, pixels).expect("same dims");
        return Ok((out, warnings));
    }

    let radius = (block - 1) / 2;
    let sigma = 0.3 * (radius as f64 - 1.0) + 0.8;
    let mut kernel = Vec::with_capacity(block);
    let mut ksum = 0.0f64;
    for i in 0..block {
        let d = i as f64 - radius as f64;
        let v = (-d * d / (2.0 * sigma * sigma)).exp();
        kernel.push(v);
        ksum += v;
    }
    for v in &mut kernel {
        *v /= ksum;
    }

    // Separable weighted mean in f64, replicate border on both passes.
    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                let sx = x as isize + k as isize - radius as isize;
                acc += kw * img.get_clamped(sx, y as isize) as f64;
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut pixels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius as isize).clamp(0, h as isize - 1);
                acc += kw * horiz[sy as usize * w + x];
            }
            let t = acc - c;
            pixels[y * w + x] = if (img.get(x, y) as f64) > t { 255 } else { 0 };
        }
    }
    let out = GrayImage::new(w, h, pixels).expect("same dims");
    Ok((out, warnings))
}
