//! Dense feature maps, attention grids and the correlation kernels shared by
//! every search policy.
//!
//! Feature maps are stored row-major as `(channel, row, col)` in `f64`. The
//! on-disk `IVSNT1` format stores the same layout as little-endian `f32`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search-image pixels per feature-map cell, as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    num: u32,
    den: u32,
}

impl Scale {
    pub const ONE: Scale = Scale { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Parameter(format!(
                "spatial scale must be positive, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Scale {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(pixels_per_cell: u32) -> Result<Self> {
        Self::new(pixels_per_cell, 1)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Number of whole pixels spanned by `cells` feature cells.
    pub fn cells_to_pixels(&self, cells: usize) -> usize {
        cells * self.num as usize / self.den as usize
    }

    /// Scale of a map derived from this one by a stride of `factor` cells.
    pub fn times(&self, factor: u32) -> Scale {
        // factor > 0 is guaranteed by callers
        Scale::new(self.num * factor, self.den).expect("positive factor")
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad scale `{s}`, expected p/q"));
        let (p, q) = s.split_once('/').ok_or_else(bad)?;
        let p = p.parse().map_err(|_| bad())?;
        let q = q.parse().map_err(|_| bad())?;
        Scale::new(p, q)
    }
}

/// Activations of one network layer for one image or tile.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    scale: Scale,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        scale: Scale,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "feature map dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite activation at index {i}")));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
            scale,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, scale: Scale) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
            scale,
        )
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

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value;
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Multiplies every activation by `factor`.
    pub fn scaled(&self, factor: f64) -> FeatureMap {
        FeatureMap {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Writes the map in `IVSNT1` format.
    pub fn write_ivsnt<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("writing IVSNT1 tensor", e);
        write!(
            w,
            "IVSNT1\ndtype=f32 order=chw dims={} {} {} scale={}\n",
            self.channels, self.height, self.width, self.scale
        )
        .map_err(io)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&bytes).map_err(io)?;
        Ok(())
    }

    /// Reads a map in `IVSNT1` format.
    pub fn read_ivsnt<R: BufRead>(mut r: R) -> Result<Self> {
        let io = |e| Error::io("reading IVSNT1 tensor", e);
        let mut magic = String::new();
        r.read_line(&mut magic).map_err(io)?;
        if magic != "IVSNT1\n" {
            return Err(Error::Format(format!(
                "bad magic line {:?}",
                magic.trim_end()
            )));
        }
        let mut header = String::new();
        r.read_line(&mut header).map_err(io)?;
        let (channels, height, width, scale) = parse_header(header.trim_end_matches('\n'))?;

        let expected = channels * height * width * 4;
        let mut bytes = Vec::with_capacity(expected);
        r.read_to_end(&mut bytes).map_err(io)?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, header {channels}x{height}x{width} requires {expected}",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        FeatureMap::new(channels, height, width, data, scale)
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_ivsnt(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_ivsnt(std::io::BufReader::new(file))
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, usize, Scale)> {
    let bad = || Error::Format(format!("bad IVSNT1 header {line:?}"));
    let rest = line.strip_prefix("dtype=f32 order=chw dims=").ok_or_else(bad)?;
    let (dims, scale) = rest.split_once(" scale=").ok_or_else(bad)?;
    let dims: Vec<usize> = dims
        .split(' ')
        .map(|d| d.parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [c, h, w] = dims[..] else {
        return Err(bad());
    };
    Ok((c, h, w, scale.parse()?))
}

/// A 2D grid over search-image pixels, indexed `(x, y)` = `(col, row)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl AttentionMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("attention map must be non-empty".into()));
        }
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} values for a {height}x{width} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("attention values must be finite".into()));
        }
        Ok(AttentionMap {
            height,
            width,
            values,
            normalized: false,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        AttentionMap {
            height,
            width,
            values: vec![0.0; height * width],
            normalized: false,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        AttentionMap {
            height,
            width,
            values: vec![value; height * width],
            normalized: false,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value;
        self.normalized = false;
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        self.normalized = false;
        &mut self.values
    }

    /// Maximum value inside the clipped window, or `None` if it misses the map.
    pub fn window_max(&self, win: &PixelWindow) -> Option<f64> {
        let (x0, x1, y0, y1) = win.clip(self.width, self.height)?;
        let mut best = f64::NEG_INFINITY;
        for y in y0..y1 {
            for &v in &self.values[y * self.width + x0..y * self.width + x1] {
                best = best.max(v);
            }
        }
        Some(best)
    }

    /// Zeroes the clipped window in place and returns how many cells it covered.
    pub fn suppress(&mut self, win: &PixelWindow) -> usize {
        let Some((x0, x1, y0, y1)) = win.clip(self.width, self.height) else {
            return 0;
        };
        for y in y0..y1 {
            self.values[y * self.width + x0..y * self.width + x1].fill(0.0);
        }
        (x1 - x0) * (y1 - y0)
    }

    /// Single-channel feature map view, for dumping in `IVSNT1` format.
    pub fn to_feature_map(&self) -> FeatureMap {
        FeatureMap::new(1, self.height, self.width, self.values.clone(), Scale::ONE)
            .expect("attention values are finite")
    }
}

/// Axis-aligned window of pixels centred on a point.
///
/// A window of extent `w` covers columns `center_x - w/2 .. center_x - w/2 + w`
/// (integer division), so odd extents are exactly centred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelWindow {
    pub center_x: i64,
    pub center_y: i64,
    pub width: u32,
    pub height: u32,
}

impl PixelWindow {
    pub fn new(center_x: i64, center_y: i64, width: u32, height: u32) -> Self {
        PixelWindow {
            center_x,
            center_y,
            width,
            height,
        }
    }

    pub fn square(center_x: i64, center_y: i64, side: u32) -> Self {
        Self::new(center_x, center_y, side, side)
    }

    /// Unclipped half-open extent `(x0, x1, y0, y1)`.
    pub fn bounds(&self) -> (i64, i64, i64, i64) {
        let x0 = self.center_x - i64::from(self.width / 2);
        let y0 = self.center_y - i64::from(self.height / 2);
        (
            x0,
            x0 + i64::from(self.width),
            y0,
            y0 + i64::from(self.height),
        )
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        let (x0, x1, y0, y1) = self.bounds();
        x >= x0 && x < x1 && y >= y0 && y < y1
    }

    /// Intersection with a `width` x `height` image, `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let (x0, x1, y0, y1) = self.bounds();
        let x0 = x0.max(0);
        let y0 = y0.max(0);
        let x1 = x1.min(width as i64);
        let y1 = y1.min(height as i64);
        (x0 < x1 && y0 < y1).then_some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
    }

    /// True when the two windows share at least one pixel.
    pub fn overlaps(&self, other: &PixelWindow) -> bool {
        let (ax0, ax1, ay0, ay1) = self.bounds();
        let (bx0, bx1, by0, by1) = other.bounds();
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }
}

/// Valid-mode multichannel cross-correlation on the feature grid.
///
/// Returns a `(search.height - kernel.height + 1) x (search.width - kernel.width + 1)`
/// grid. Each output accumulates products in channel, kernel-row, kernel-col
/// order.
pub fn xcorr2d_valid(search: &FeatureMap, kernel: &FeatureMap) -> Result<AttentionMap> {
    if search.channels != kernel.channels {
        return Err(Error::Dimension(format!(
            "channel mismatch: search has {}, kernel has {}",
            search.channels, kernel.channels
        )));
    }
    if kernel.height > search.height || kernel.width > search.width {
        return Err(Error::Dimension(format!(
            "kernel {}x{} larger than search map {}x{}",
            kernel.height, kernel.width, search.height, search.width
        )));
    }
    let out_h = search.height - kernel.height + 1;
    let out_w = search.width - kernel.width + 1;
    let (kh, kw) = (kernel.height, kernel.width);
    let mut out = vec![0.0; out_h * out_w];
    for (r, out_row) in out.chunks_exact_mut(out_w).enumerate() {
        for (c, cell) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ch in 0..search.channels {
                let s = search.channel(ch);
                let k = kernel.channel(ch);
                for kr in 0..kh {
                    let srow = &s[(r + kr) * search.width + c..][..kw];
                    let krow = &k[kr * kw..][..kw];
                    for (a, b) in srow.iter().zip(krow) {
                        acc += a * b;
                    }
                }
            }
            *cell = acc;
        }
    }
    AttentionMap::new(out_h, out_w, out)
}

/// Maps a valid-mode correlation grid back onto pixels by nearest neighbour.
///
/// Output cell `(0, 0)` lands on the pixel block under the kernel centre; pixels
/// not covered by any valid placement are zero.
pub fn upsample_to_pixels(
    grid: &AttentionMap,
    scale: Scale,
    kernel_height: usize,
    kernel_width: usize,
    height: usize,
    width: usize,
) -> AttentionMap {
    let (p, q) = (i64::from(scale.num), i64::from(scale.den));
    let index = |pixel: usize, k: usize| -> i64 {
        ((2 * pixel as i64 + 1) * q - (k as i64 - 1) * p).div_euclid(2 * p)
    };
    let cols: Vec<Option<usize>> = (0..width)
        .map(|x| {
            let c = index(x, kernel_width);
            (c >= 0 && (c as usize) < grid.width).then_some(c as usize)
        })
        .collect();
    let mut out = AttentionMap::zeros(height, width);
    for y in 0..height {
        let r = index(y, kernel_height);
        if r < 0 || r as usize >= grid.height {
            continue;
        }
        let src = &grid.values[r as usize * grid.width..][..grid.width];
        let dst = &mut out.values[y * width..][..width];
        for (d, c) in dst.iter_mut().zip(&cols) {
            if let Some(c) = c {
                *d = src[*c];
            }
        }
    }
    out
}

/// Correlates `kernel` over `search` and places the result on a pixel grid of
/// the given size.
pub fn xcorr2d_to_pixels(
    search: &FeatureMap,
    kernel: &FeatureMap,
    height: usize,
    width: usize,
) -> Result<AttentionMap> {
    let grid = xcorr2d_valid(search, kernel)?;
    Ok(upsample_to_pixels(
        &grid,
        search.scale,
        kernel.height,
        kernel.width,
        height,
        width,
    ))
}

/// Cross-correlation (no kernel flip) mapped to the pixel grid implied by the
/// search map's spatial scale.
pub fn xcorr2d_multichannel(search: &FeatureMap, kernel: &FeatureMap) -> Result<AttentionMap> {
    let height = search.scale.cells_to_pixels(search.height).max(1);
    let width = search.scale.cells_to_pixels(search.width).max(1);
    xcorr2d_to_pixels(search, kernel, height, width)
}

/// Affine rescale to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize01(map: &AttentionMap) -> AttentionMap {
    let (lo, hi) = map
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let values = if range > 0.0 {
        map.values.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; map.values.len()]
    };
    AttentionMap {
        values,
        normalized: true,
        ..*map
    }
}

/// Returns a copy with the clipped window zeroed. A window that misses the map
/// leaves it unchanged and logs a warning.
pub fn suppress_window(map: &AttentionMap, win: &PixelWindow) -> AttentionMap {
    let mut out = map.clone();
    if out.suppress(win) == 0 {
        log::warn!("suppression window {win:?} lies outside the map");
    }
    out
}

/// Location `(x, y)` of the maximum, ties resolved to the smallest row then
/// column. `None` when every value is zero (the map has been exhausted).
pub fn argmax_pixel(map: &AttentionMap) -> Option<(usize, usize)> {
    if map.values.iter().all(|&v| v == 0.0) {
        return None;
    }
    let mut best = 0;
    for (i, &v) in map.values.iter().enumerate() {
        if v > map.values[best] {
            best = i;
        }
    }
    Some((best % map.width, best / map.width))
}

/// Like [`argmax_pixel`], restricted to cells where `available` is true.
pub fn argmax_available(map: &AttentionMap, available: &[bool]) -> Option<(usize, usize)> {
    debug_assert_eq!(available.len(), map.values.len());
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in map.values.iter().zip(available).enumerate() {
        if ok && best.map_or(true, |b| v > map.values[b]) {
            best = Some(i);
        }
    }
    best.map(|b| (b % map.width, b / map.width))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmap(c: usize, h: usize, w: usize, data: Vec<f64>) -> FeatureMap {
        FeatureMap::new(c, h, w, data, Scale::ONE).unwrap()
    }

    #[test]
    fn identity_kernel_returns_search_map() {
        let search = fmap(1, 3, 4, (0..12).map(f64::from).collect());
        let kernel = fmap(1, 1, 1, vec![1.0]);
        let out = xcorr2d_multichannel(&search, &kernel).unwrap();
        assert_eq!((out.height(), out.width()), (3, 4));
        assert_eq!(out.values(), search.data());
    }

    #[test]
    fn ones_kernel_sums_channels() {
        let search = fmap(2, 2, 2, vec![1., 2., 3., 4., 10., 20., 30., 40.]);
        let kernel = fmap(2, 1, 1, vec![1.0, 1.0]);
        let out = xcorr2d_multichannel(&search, &kernel).unwrap();
        assert_eq!(out.values(), &[11., 22., 33., 44.]);
    }

    #[test]
    fn correlation_does_not_flip_kernel() {
        // kernel [1, 2] against [1, 0, 0]: no flip gives 1 at c=0, a flip would give 2.
        let search = fmap(1, 1, 3, vec![1.0, 0.0, 0.0]);
        let kernel = fmap(1, 1, 2, vec![1.0, 2.0]);
        let grid = xcorr2d_valid(&search, &kernel).unwrap();
        assert_eq!(grid.values(), &[1.0, 0.0]);
    }

    #[test]
    fn xcorr_rejects_bad_shapes() {
        let search = fmap(2, 3, 3, vec![0.0; 18]);
        assert!(matches!(
            xcorr2d_valid(&search, &fmap(1, 1, 1, vec![1.0])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            xcorr2d_valid(&search, &fmap(2, 4, 1, vec![1.0; 8])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn upsampling_centres_output_under_kernel() {
        // 5x5 search at 4 px/cell with a 3x3 kernel gives a 3x3 grid whose
        // first cell sits under feature cell (1, 1), i.e. pixels 4..8.
        let search = FeatureMap::new(1, 5, 5, vec![1.0; 25], Scale::integer(4).unwrap()).unwrap();
        let kernel = fmap(1, 3, 3, vec![1.0; 9]);
        let out = xcorr2d_multichannel(&search, &kernel).unwrap();
        assert_eq!((out.height(), out.width()), (20, 20));
        assert_eq!(out.get(3, 3), 0.0);
        assert_eq!(out.get(4, 4), 9.0);
        assert_eq!(out.get(15, 15), 9.0);
        assert_eq!(out.get(16, 16), 0.0);
    }

    #[test]
    fn normalize_examples() {
        let m = AttentionMap::new(1, 3, vec![2.0, 4.0, 6.0]).unwrap();
        let n = normalize01(&m);
        assert_eq!(n.values(), &[0.0, 0.5, 1.0]);
        assert!(n.is_normalized());

        let c = AttentionMap::new(1, 3, vec![5.0; 3]).unwrap();
        assert_eq!(normalize01(&c).values(), &[0.0; 3]);
    }

    #[test]
    fn suppress_examples() {
        let m = AttentionMap::filled(10, 10, 1.0);
        let whole = suppress_window(&m, &PixelWindow::square(5, 5, 40));
        assert!(whole.values().iter().all(|&v| v == 0.0));

        let outside = suppress_window(&m, &PixelWindow::square(-20, -20, 3));
        assert_eq!(outside, m);

        let centre = suppress_window(&m, &PixelWindow::square(5, 5, 3));
        assert_eq!(centre.values().iter().filter(|&&v| v == 0.0).count(), 9);
    }

    #[test]
    fn argmax_examples() {
        let mut m = AttentionMap::zeros(10, 10);
        m.set(7, 3, 2.0);
        assert_eq!(argmax_pixel(&m), Some((7, 3)));

        let mut tie = AttentionMap::zeros(10, 10);
        tie.set(4, 5, 1.0);
        tie.set(8, 2, 1.0);
        assert_eq!(argmax_pixel(&tie), Some((8, 2)));

        assert_eq!(argmax_pixel(&AttentionMap::zeros(4, 4)), None);
    }

    #[test]
    fn argmax_available_skips_masked_cells() {
        let m = AttentionMap::new(1, 3, vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(argmax_available(&m, &[false, true, true]), Some((1, 0)));
        assert_eq!(argmax_available(&m, &[false; 3]), None);
    }

    #[test]
    fn window_geometry() {
        let w = PixelWindow::square(10, 10, 45);
        assert!(w.contains(10 + 22, 10));
        assert!(!w.contains(10 + 23, 10));
        let even = PixelWindow::square(100, 100, 200);
        assert_eq!(even.bounds(), (0, 200, 0, 200));
        assert!(w.overlaps(&PixelWindow::square(50, 10, 45)));
        assert!(!w.overlaps(&PixelWindow::square(55, 10, 45)));
    }

    #[test]
    fn ivsnt_header_and_errors() {
        let m = FeatureMap::new(2, 1, 2, vec![1.0, -2.5, 3.25, 0.0], Scale::new(32, 1).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        m.write_ivsnt(&mut buf).unwrap();
        assert!(buf.starts_with(b"IVSNT1\ndtype=f32 order=chw dims=2 1 2 scale=32/1\n"));
        assert_eq!(FeatureMap::read_ivsnt(&buf[..]).unwrap(), m);

        let truncated = &buf[..buf.len() - 1];
        assert!(matches!(FeatureMap::read_ivsnt(truncated), Err(Error::Format(_))));
        assert!(matches!(
            FeatureMap::read_ivsnt(&b"IVSNT2\n"[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("32/2".parse::<Scale>().unwrap(), Scale::new(16, 1).unwrap());
        assert!("0/1".parse::<Scale>().is_err());
        assert!("3".parse::<Scale>().is_err());
    }
}
