//! Object pathway feature placement.
//!
//! An object pathway reads features at an object's bounding box, turns them
//! into an object-specific patch, and writes the patch back into an initially
//! empty grid at the same box. This module implements the geometric part:
//! bilinear extraction from a box, bilinear placement into a box, and the
//! accumulation of many placements into one grid that is zero outside every
//! box.
//!
//! Pixel `i` of a size-`n` axis has its centre at `(i + 0.5) / n` in
//! normalized coordinates. With that convention, a box whose edges fall on
//! pixel boundaries and whose pixel size equals the patch size maps patch
//! pixels one-to-one onto grid pixels.

use crate::detection_io::BBox;

/// Spatial size of the second object pathway's features.
pub const SECOND_PATHWAY_SIZE: usize = 16;
/// Spatial size of the third object pathway's features.
pub const THIRD_PATHWAY_SIZE: usize = 32;

/// Sample positions this close to a pixel centre snap onto it.
const SNAP_EPS: f64 = 1e-9;
const DEGENERATE_EXTENT: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PathwayError {
    #[error("box {w}x{h} covers less than a pixel's billionth")]
    DegenerateBox { w: f64, h: f64 },
    #[error("patch has {found} channels, expected {expected}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("grid shape {channels}x{height}x{width} does not match {len} values")]
    ShapeMismatch {
        channels: usize,
        height: usize,
        width: usize,
        len: usize,
    },
    #[error("grid contains a non-finite value")]
    NonFinite,
    #[error("output size must be at least 1x1")]
    EmptyOutput,
}

/// `channels x height x width` array, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, PathwayError> {
        if height == 0 || width == 0 || data.len() != channels * height * width {
            return Err(PathwayError::ShapeMismatch {
                channels,
                height,
                width,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PathwayError::NonFinite);
        }
        Ok(FeatureGrid { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureGrid {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        FeatureGrid { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Bilinear sample of channel `c` at continuous pixel coordinates, where
    /// integer coordinates are pixel centres. Clamped at the border.
    fn sample(&self, c: usize, sy: f64, sx: f64) -> f64 {
        let plane = self.plane(c);
        let (y0, y1, ty) = axis_weights(sy, self.height);
        let (x0, x1, tx) = axis_weights(sx, self.width);
        let at = |y: usize, x: usize| plane[y * self.width + x];
        let top = lerp(at(y0, x0), at(y0, x1), tx);
        let bottom = lerp(at(y1, x0), at(y1, x1), tx);
        lerp(top, bottom, ty)
    }

    pub fn scale(&self, k: f64) -> Self {
        FeatureGrid {
            data: self.data.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    /// Elementwise `self + other`; shapes must agree.
    pub fn add(&self, other: &FeatureGrid) -> Result<Self, PathwayError> {
        if (self.channels, self.height, self.width) != (other.channels, other.height, other.width) {
            return Err(PathwayError::ChannelMismatch {
                expected: self.channels,
                found: other.channels,
            });
        }
        Ok(FeatureGrid {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Neighbouring indices and interpolation weight along one axis.
fn axis_weights(s: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let mut s = s.clamp(0.0, max);
    let nearest = s.round();
    if (s - nearest).abs() < SNAP_EPS {
        s = nearest;
    }
    let i0 = s.floor();
    let t = s - i0;
    let i0 = i0 as usize;
    (i0, (i0 + 1).min(n - 1), t)
}

fn check_box(b: &BBox, height: usize, width: usize) -> Result<(), PathwayError> {
    if b.w * (width as f64) < DEGENERATE_EXTENT || b.h * (height as f64) < DEGENERATE_EXTENT {
        return Err(PathwayError::DegenerateBox { w: b.w, h: b.h });
    }
    Ok(())
}

/// Resamples the region of `grid` under `bbox` to `out_h x out_w`.
pub fn extract(grid: &FeatureGrid, bbox: &BBox, out_h: usize, out_w: usize) -> Result<FeatureGrid, PathwayError> {
    if out_h == 0 || out_w == 0 {
        return Err(PathwayError::EmptyOutput);
    }
    check_box(bbox, grid.height, grid.width)?;
    let (gh, gw) = (grid.height as f64, grid.width as f64);
    let src_y: Vec<f64> = (0..out_h)
        .map(|i| (bbox.y + (i as f64 + 0.5) / out_h as f64 * bbox.h) * gh - 0.5)
        .collect();
    let src_x: Vec<f64> = (0..out_w)
        .map(|j| (bbox.x + (j as f64 + 0.5) / out_w as f64 * bbox.w) * gw - 0.5)
        .collect();
    Ok(FeatureGrid::from_fn(grid.channels, out_h, out_w, |c, i, j| {
        grid.sample(c, src_y[i], src_x[j])
    }))
}

/// Source coordinate in the patch for every output pixel along one axis, or
/// `None` where the pixel centre is outside `[start, start + extent)`.
fn placement_axis(start: f64, extent: f64, out: usize, patch: usize) -> Vec<Option<f64>> {
    (0..out)
        .map(|i| {
            let centre = (i as f64 + 0.5) / out as f64;
            (centre >= start && centre < start + extent)
                .then(|| (centre - start) / extent * patch as f64 - 0.5)
        })
        .collect()
}

/// Resizes `patch` into the pixels of an `out_h x out_w` grid whose centres
/// fall inside `bbox`; every other pixel is exactly zero.
pub fn place(patch: &FeatureGrid, bbox: &BBox, out_h: usize, out_w: usize) -> Result<FeatureGrid, PathwayError> {
    if out_h == 0 || out_w == 0 {
        return Err(PathwayError::EmptyOutput);
    }
    check_box(bbox, out_h, out_w)?;
    let ys = placement_axis(bbox.y, bbox.h, out_h, patch.height);
    let xs = placement_axis(bbox.x, bbox.w, out_w, patch.width);
    Ok(FeatureGrid::from_fn(patch.channels, out_h, out_w, |c, i, j| {
        match (ys[i], xs[j]) {
            (Some(sy), Some(sx)) => patch.sample(c, sy, sx),
            _ => 0.0,
        }
    }))
}

/// A patch destined for a box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPlacement {
    pub bbox: BBox,
    pub patch: FeatureGrid,
}

/// Sum of [`place`] over `placements`, added left to right in list order.
/// An empty list gives the all-zero grid with `channels` channels.
pub fn accumulate(
    placements: &[BoxPlacement],
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Result<FeatureGrid, PathwayError> {
    if out_h == 0 || out_w == 0 {
        return Err(PathwayError::EmptyOutput);
    }
    let mut rho = FeatureGrid::zeros(channels, out_h, out_w);
    for p in placements {
        if p.patch.channels != channels {
            return Err(PathwayError::ChannelMismatch {
                expected: channels,
                found: p.patch.channels,
            });
        }
        let placed = place(&p.patch, &p.bbox, out_h, out_w)?;
        for (acc, v) in rho.data.iter_mut().zip(&placed.data) {
            *acc += v;
        }
    }
    Ok(rho)
}

/// Renders one channel as a binary PGM (P5), scaled linearly so the minimum
/// maps to 0 and the maximum to 255.
pub fn render_pgm(grid: &FeatureGrid, channel: usize) -> Vec<u8> {
    let plane = grid.plane(channel);
    let (lo, hi) = plane
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.extend(plane.iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}
