use crate::raster::{Mask, PatchBox, Raster};

/// Per-channel summed-area table with a zero guard row and column, so
/// rectangle sums never branch on the border.
#[derive(Debug, Clone)]
pub struct Sat {
    width: usize,
    channels: usize,
    table: Vec<f64>,
}

impl Sat {
    pub fn build(image: &Raster) -> Self {
        Self::from_fn(image.width(), image.height(), image.channels(), |x, y, c| {
            image.sample(x, y, c)
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let stride = (width + 1) * channels;
        let mut table = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let (prev, cur) = table.split_at_mut((y + 1) * stride);
            let prev = &prev[y * stride..];
            let cur = &mut cur[..stride];
            for x in 0..width {
                for c in 0..channels {
                    let i = (x + 1) * channels + c;
                    cur[i] = f(x, y, c) + cur[i - channels] + prev[i] - prev[i - channels];
                }
            }
        }
        Self {
            width,
            channels,
            table,
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.table[(y * (self.width + 1) + x) * self.channels + c]
    }

    /// Sum over the inclusive rectangle for one channel.
    #[inline]
    pub fn rect_sum(&self, c: usize, b: PatchBox) -> f64 {
        self.at(b.x1 + 1, b.y1 + 1, c) - self.at(b.x0, b.y1 + 1, c) - self.at(b.x1 + 1, b.y0, c)
            + self.at(b.x0, b.y0, c)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

/// Counts target pixels inside rectangles in O(1). Counts are exact:
/// they are integers well below 2^53.
#[derive(Debug, Clone)]
pub struct MaskSat {
    sat: Sat,
}

impl MaskSat {
    pub fn build(mask: &Mask) -> Self {
        Self {
            sat: Sat::from_fn(mask.width(), mask.height(), 1, |x, y, _| {
                if mask.is_target(x, y) {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }

    #[inline]
    pub fn target_count(&self, b: PatchBox) -> usize {
        self.sat.rect_sum(0, b).round() as usize
    }

    #[inline]
    pub fn all_known(&self, b: PatchBox) -> bool {
        self.target_count(b) == 0
    }
}

/// Per-row prefix sums for O(1) horizontal run sums.
#[derive(Debug, Clone)]
pub struct RowPrefix {
    width: usize,
    channels: usize,
    rows: Vec<f64>,
}

impl RowPrefix {
    pub fn build(image: &Raster) -> Self {
        let (width, height, channels) = (image.width(), image.height(), image.channels());
        let stride = (width + 1) * channels;
        let mut rows = vec![0.0; stride * height];
        for y in 0..height {
            let row = &mut rows[y * stride..(y + 1) * stride];
            for x in 0..width {
                for c in 0..channels {
                    let i = (x + 1) * channels + c;
                    row[i] = image.sample(x, y, c) + row[i - channels];
                }
            }
        }
        Self {
            width,
            channels,
            rows,
        }
    }

    /// Sum of samples (x0..=x1, y) for one channel.
    #[inline]
    pub fn run_sum(&self, c: usize, y: usize, x0: usize, x1: usize) -> f64 {
        let base = y * (self.width + 1) * self.channels;
        self.rows[base + (x1 + 1) * self.channels + c] - self.rows[base + x0 * self.channels + c]
    }
}
