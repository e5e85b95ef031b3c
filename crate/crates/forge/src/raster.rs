//! Core raster types shared by the whole imaging pipeline.
//!
//! Both types store 8-bit pixels row-major with explicit dimensions and
//! reject inconsistent buffers at construction, so every later stage can
//! index without re-validating.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("InvalidDimensions: {width}x{height} does not match {len} pixels")]
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("InvalidDimensions: zero-sized image {width}x{height}")]
    ZeroSized { width: usize, height: usize },
}

/// Single-channel 8-bit image. The byteplot and enhancement currency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroSized { width, height });
        }
        if pixels.len() != width * height {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeroed(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "zero-sized image");
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "zero-sized image");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Sample with the replicate border policy: out-of-range coordinates
    /// clamp to the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.width)
    }
}

/// Three-channel 8-bit image, interleaved RGB row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroSized { width, height });
        }
        if data.len() != 3 * width * height {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Build from three equally sized planes, one per channel.
    pub fn from_planes(
        red: &GrayImage,
        green: &GrayImage,
        blue: &GrayImage,
    ) -> Result<Self, RasterError> {
        let (w, h) = (red.width(), red.height());
        for plane in [green, blue] {
            if plane.width() != w || plane.height() != h {
                return Err(RasterError::InvalidDimensions {
                    width: plane.width(),
                    height: plane.height(),
                    len: plane.pixels().len(),
                });
            }
        }
        let mut data = Vec::with_capacity(3 * w * h);
        for i in 0..w * h {
            data.push(red.pixels()[i]);
            data.push(green.pixels()[i]);
            data.push(blue.pixels()[i]);
        }
        Self::new(w, h, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved RGB bytes, 3 per pixel.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Extract one channel (0 = red, 1 = green, 2 = blue) as a grayscale plane.
    pub fn channel(&self, idx: usize) -> GrayImage {
        assert!(idx < 3, "channel index out of range");
        let pixels = self.data.iter().skip(idx).step_by(3).copied().collect();
        GrayImage::new(self.width, self.height, pixels).expect("plane dims match image dims")
    }
}
