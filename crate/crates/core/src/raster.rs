use crate::error::{Error, Result};

/// Planar image buffer. Samples are f64 in [0, 255], row-major,
/// channel-interleaved. `channels` is 1 (gray) or 3 (rgb).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParam(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let mut r = Self::new(width, height, channels)?;
        if data.len() != r.data.len() {
            return Err(Error::InvalidParam(format!(
                "sample buffer has {} values, {}x{}x{} needs {}",
                data.len(),
                width,
                height,
                channels,
                r.data.len()
            )));
        }
        r.data = data;
        Ok(r)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut r = Self::new(width, height, channels)?;
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    r.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        Ok(r)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn base(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let b = self.base(x, y);
        &self.data[b..b + self.channels]
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.base(x, y) + c]
    }

    #[inline]
    pub fn set_sample(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let b = self.base(x, y);
        self.data[b + c] = v;
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.channels);
        let b = self.base(x, y);
        self.data[b..b + self.channels].copy_from_slice(v);
    }

    /// Contiguous interleaved samples of (x0..=x1, y), all channels.
    #[inline]
    pub fn row_slice(&self, y: usize, x0: usize, x1: usize) -> &[f64] {
        debug_assert!(x0 <= x1 && x1 < self.width && y < self.height);
        let b = (y * self.width + x0) * self.channels;
        let e = (y * self.width + x1 + 1) * self.channels;
        &self.data[b..e]
    }

    pub fn copy_pixel(&mut self, dst: (usize, usize), src: (usize, usize)) {
        let sb = self.base(src.0, src.1);
        let db = self.base(dst.0, dst.1);
        for c in 0..self.channels {
            self.data[db + c] = self.data[sb + c];
        }
    }

    /// Per-pixel mean over channels; identity for single-channel rasters.
    pub fn mean_channels(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let inv = 1.0 / self.channels as f64;
        Raster::from_fn(self.width, self.height, 1, |x, y, _| {
            self.pixel(x, y).iter().sum::<f64>() * inv
        })
        .expect("source raster is non-empty")
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }
}

/// Target-region mask. `true` marks pixels to synthesize. The target
/// count is maintained so population queries are O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            width,
            height,
            data: vec![false; width * height],
            count: 0,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                m.set(x, y, f(x, y));
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_target(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, target: bool) {
        debug_assert!(x < self.width && y < self.height);
        let cell = &mut self.data[y * self.width + x];
        match (*cell, target) {
            (false, true) => self.count += 1,
            (true, false) => self.count -= 1,
            _ => {}
        }
        *cell = target;
    }

    pub fn target_count(&self) -> usize {
        self.count
    }

    /// Target coordinates in row-major order.
    pub fn target_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).filter_map(move |x| self.is_target(x, y).then_some((x, y)))
        })
    }

    pub fn matches(&self, image: &Raster) -> bool {
        self.width == image.width() && self.height == image.height()
    }
}

/// Inclusive pixel rectangle, clipped to image bounds on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PatchBox {
    /// Window of side `2*half + 1` around (cx, cy), clipped to the image.
    pub fn clipped(cx: usize, cy: usize, half: usize, width: usize, height: usize) -> Self {
        debug_assert!(cx < width && cy < height);
        PatchBox {
            x0: cx.saturating_sub(half),
            y0: cy.saturating_sub(half),
            x1: (cx + half).min(width - 1),
            y1: (cy + half).min(height - 1),
        }
    }

    /// Same window, only when it lies entirely inside the image.
    pub fn full(cx: usize, cy: usize, half: usize, width: usize, height: usize) -> Option<Self> {
        if cx >= half && cy >= half && cx + half < width && cy + half < height {
            Some(PatchBox {
                x0: cx - half,
                y0: cy - half,
                x1: cx + half,
                y1: cy + half,
            })
        } else {
            None
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| (x, y)))
    }
}

/// Rejects even or too-small patch sides.
pub fn validate_patch_size(patch: usize) -> Result<usize> {
    if patch < 3 || patch % 2 == 0 {
        return Err(Error::InvalidParam(format!(
            "patch size must be odd and at least 3, got {patch}"
        )));
    }
    Ok(patch / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_roundtrip() {
        let mut r = Raster::new(4, 3, 3).unwrap();
        r.set_pixel(2, 1, &[10.0, 20.0, 30.0]);
        assert_eq!(r.pixel(2, 1), &[10.0, 20.0, 30.0]);
        assert_eq!(r.sample(2, 1, 2), 30.0);
        assert_eq!(r.pixel(0, 0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(Raster::new(0, 5, 1), Err(Error::ZeroDimension)));
        assert!(matches!(Mask::new(3, 0), Err(Error::ZeroDimension)));
    }

    #[test]
    fn mean_channels_averages() {
        let r = Raster::from_fn(2, 1, 3, |x, _, c| (x * 3 + c) as f64 * 3.0).unwrap();
        let m = r.mean_channels();
        assert_eq!(m.channels(), 1);
        // (0 + 3 + 6) / 3 and (9 + 12 + 15) / 3
        assert_eq!(m.sample(0, 0, 0), 3.0);
        assert_eq!(m.sample(1, 0, 0), 12.0);
    }

    #[test]
    fn patch_box_clips_at_borders() {
        let b = PatchBox::clipped(0, 0, 2, 10, 10);
        assert_eq!((b.x0, b.y0, b.x1, b.y1), (0, 0, 2, 2));
        assert_eq!(b.area(), 9);

        let b = PatchBox::clipped(9, 9, 2, 10, 10);
        assert_eq!((b.x0, b.y0, b.x1, b.y1), (7, 7, 9, 9));

        let b = PatchBox::clipped(5, 5, 2, 10, 10);
        assert_eq!(b.area(), 25);
    }

    #[test]
    fn full_box_requires_margin() {
        assert!(PatchBox::full(1, 5, 2, 10, 10).is_none());
        assert!(PatchBox::full(2, 5, 2, 10, 10).is_some());
        assert!(PatchBox::full(7, 5, 2, 10, 10).is_some());
        assert!(PatchBox::full(8, 5, 2, 10, 10).is_none());
    }

    #[test]
    fn cells_row_major() {
        let b = PatchBox {
            x0: 1,
            y0: 2,
            x1: 2,
            y1: 3,
        };
        let v: Vec<_> = b.cells().collect();
        assert_eq!(v, vec![(1, 2), (2, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn patch_size_validation() {
        assert!(validate_patch_size(2).is_err());
        assert!(validate_patch_size(4).is_err());
        assert!(validate_patch_size(1).is_err());
        assert_eq!(validate_patch_size(3).unwrap(), 1);
        assert_eq!(validate_patch_size(9).unwrap(), 4);
    }

    #[test]
    fn target_pixels_in_row_major_order() {
        let m = Mask::from_fn(3, 3, |x, y| (x + y) % 2 == 1).unwrap();
        let v: Vec<_> = m.target_pixels().collect();
        assert_eq!(v, vec![(1, 0), (0, 1), (2, 1), (1, 2)]);
        assert_eq!(m.target_count(), 4);
    }

    #[test]
    fn target_count_tracks_set_transitions() {
        let mut m = Mask::new(4, 4).unwrap();
        m.set(1, 1, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        assert_eq!(m.target_count(), 2);
        m.set(1, 1, false);
        m.set(1, 1, false);
        assert_eq!(m.target_count(), 1);
        let brute = m.target_pixels().count();
        assert_eq!(m.target_count(), brute);
    }
}
