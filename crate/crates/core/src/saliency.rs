//! Bottom-up saliency in the style of Itti & Koch, restricted to the
//! intensity and orientation channels of grayscale images.
//!
//! Pipeline: dyadic Gaussian pyramid (levels 0..=8), centre-surround
//! differences for centres 2..=4 and surrounds centre+3, centre+4 resampled
//! to level 4, iterative difference-of-Gaussians normalization, across-scale
//! addition, then the average of the two conspicuity maps upsampled to image
//! size.

use std::f64::consts::PI;

use crate::backend::GrayImage;
use crate::error::{Error, Result};
use crate::tensor::{normalize01, AttentionMap};

const LEVELS: usize = 9;
const CENTRES: [usize; 3] = [2, 3, 4];
const DELTAS: [usize; 2] = [3, 4];
const MAP_LEVEL: usize = 4;
const ORIENTATIONS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

const NORM_ITERATIONS: usize = 5;
const EXCITATION_SIGMA: f64 = 0.02;
const INHIBITION_SIGMA: f64 = 0.25;
const EXCITATION_GAIN: f64 = 0.5;
const INHIBITION_GAIN: f64 = 1.5;
const GLOBAL_INHIBITION: f64 = 0.02;

/// Maps whose peak is below this are treated as carrying no contrast.
const SILENT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// Separable correlation with a symmetric 1-D kernel, reflecting at borders.
    fn separable(&self, kernel: &[f64], reflect: bool) -> Plane {
        let r = (kernel.len() / 2) as isize;
        let pass = |src: &Plane, horizontal: bool| -> Plane {
            let mut out = Plane::zeros(src.width, src.height);
            let n = if horizontal { src.width } else { src.height } as isize;
            for y in 0..src.height {
                for x in 0..src.width {
                    let pos = if horizontal { x } else { y } as isize;
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let mut p = pos + k as isize - r;
                        if p < 0 || p >= n {
                            if !reflect {
                                continue;
                            }
                            p = reflect_index(p, n);
                        }
                        let v = if horizontal {
                            src.at(p as usize, y)
                        } else {
                            src.at(x, p as usize)
                        };
                        acc += w * v;
                    }
                    out.data[y * src.width + x] = acc;
                }
            }
            out
        };
        pass(&pass(self, true), false)
    }

    fn blur_subsample(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let blurred = self.separable(&K, true);
        let (w, h) = (self.width / 2, self.height / 2);
        let mut out = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = blurred.at(2 * x, 2 * y);
            }
        }
        out
    }

    /// Bilinear resampling where destination pixel `x` samples source
    /// coordinate `x * factor`.
    fn resample(&self, width: usize, height: usize, factor: f64) -> Plane {
        let mut out = Plane::zeros(width, height);
        for y in 0..height {
            let sy = (y as f64 * factor).min((self.height - 1) as f64);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let fy = sy - y0 as f64;
            for x in 0..width {
                let sx = (x as f64 * factor).min((self.width - 1) as f64);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let fx = sx - x0 as f64;
                let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
                let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
                out.data[y * width + x] = top * (1.0 - fy) + bottom * fy;
            }
        }
        out
    }

    fn convolve(&self, kernel: &[f64], size: usize) -> Plane {
        let r = (size / 2) as isize;
        let mut out = Plane::zeros(self.width, self.height);
        let (w, h) = (self.width as isize, self.height as isize);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..size as isize {
                    let sy = reflect_index(y + ky - r, h);
                    for kx in 0..size as isize {
                        let sx = reflect_index(x + kx - r, w);
                        acc += kernel[(ky * size as isize + kx) as usize]
                            * self.data[(sy * w + sx) as usize];
                    }
                }
                out.data[(y * w + x) as usize] = acc;
            }
        }
        out
    }
}

fn reflect_index(p: isize, n: isize) -> isize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = p.rem_euclid(period);
    if m < n {
        m
    } else {
        period - m
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Zero-mean, unit-energy Gabor kernel at orientation `theta`.
fn gabor_kernel(theta: f64) -> (Vec<f64>, usize) {
    const SIZE: usize = 9;
    const SIGMA: f64 = 2.0;
    const WAVELENGTH: f64 = 5.0;
    let r = (SIZE / 2) as f64;
    let mut k = Vec::with_capacity(SIZE * SIZE);
    for y in 0..SIZE {
        for x in 0..SIZE {
            let (dx, dy) = (x as f64 - r, y as f64 - r);
            let u = dx * theta.cos() + dy * theta.sin();
            let v = -dx * theta.sin() + dy * theta.cos();
            let env = (-(u * u + v * v) / (2.0 * SIGMA * SIGMA)).exp();
            k.push(env * (2.0 * PI * u / WAVELENGTH).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    k.iter_mut().for_each(|v| *v /= norm);
    (k, SIZE)
}

/// Iterative within-map competition: rescale to `[0, 1]`, then repeatedly
/// add self-excitation, subtract broad inhibition and a global bias, and
/// rectify. Maps without contrast stay zero.
fn normalize_map(map: &Plane) -> Plane {
    let peak = map.max();
    if peak <= SILENT {
        return Plane::zeros(map.width, map.height);
    }
    let mut m = Plane {
        data: map.data.iter().map(|v| v.max(0.0) / peak).collect(),
        ..map.clone()
    };
    let size = map.width.max(map.height) as f64;
    let ex = gaussian_kernel((EXCITATION_SIGMA * size).max(0.5));
    let inh = gaussian_kernel((INHIBITION_SIGMA * size).max(0.5));
    for _ in 0..NORM_ITERATIONS {
        let e = m.separable(&ex, false);
        let i = m.separable(&inh, false);
        for ((v, e), i) in m.data.iter_mut().zip(&e.data).zip(&i.data) {
            let dog = EXCITATION_GAIN.powi(2) * e - INHIBITION_GAIN.powi(2) * i;
            *v = (*v + dog - GLOBAL_INHIBITION).max(0.0);
        }
    }
    m
}

fn centre_surround(pyramid: &[Plane], target: &Plane) -> Plane {
    let mut sum = Plane::zeros(target.width, target.height);
    for c in CENTRES {
        for d in DELTAS {
            let centre = &pyramid[c];
            let surround = pyramid[c + d].resample(centre.width, centre.height, 0.5f64.powi(d as i32));
            let diff = Plane {
                data: centre
                    .data
                    .iter()
                    .zip(&surround.data)
                    .map(|(a, b)| (a - b).abs())
                    .collect(),
                ..centre.clone()
            };
            let at_map_level = diff.resample(target.width, target.height, 2f64.powi((MAP_LEVEL - c) as i32));
            let n = normalize_map(&at_map_level);
            for (s, v) in sum.data.iter_mut().zip(&n.data) {
                *s += v;
            }
        }
    }
    sum
}

/// Bottom-up saliency of a grayscale image, normalized to `[0, 1]`.
///
/// Requires at least 256 pixels along each side so that every pyramid level
/// is non-empty.
pub fn ittikoch_saliency(image: &GrayImage) -> Result<AttentionMap> {
    let min_side = 1usize << (LEVELS - 1);
    if image.width() < min_side || image.height() < min_side {
        return Err(Error::Parameter(format!(
            "saliency needs images of at least {min_side}x{min_side}, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    let mut intensity = vec![Plane {
        width: image.width(),
        height: image.height(),
        data: image.pixels().to_vec(),
    }];
    for _ in 1..LEVELS {
        let next = intensity.last().expect("non-empty").blur_subsample();
        intensity.push(next);
    }
    let level = &intensity[MAP_LEVEL];

    let intensity_cons = centre_surround(&intensity, level);

    let mut orientation_cons = Plane::zeros(level.width, level.height);
    for theta in ORIENTATIONS {
        let (k, size) = gabor_kernel(theta);
        // levels below the finest centre are never read
        let oriented: Vec<Plane> = intensity
            .iter()
            .enumerate()
            .map(|(l, p)| {
                if l < CENTRES[0] {
                    return Plane::zeros(1, 1);
                }
                let mut g = p.convolve(&k, size);
                g.data.iter_mut().for_each(|v| *v = v.abs());
                g
            })
            .collect();
        let per_theta = normalize_map(&centre_surround(&oriented, level));
        for (s, v) in orientation_cons.data.iter_mut().zip(&per_theta.data) {
            *s += v;
        }
    }

    let i_n = normalize_map(&intensity_cons);
    let o_n = normalize_map(&orientation_cons);
    let combined = Plane {
        data: i_n.data.iter().zip(&o_n.data).map(|(a, b)| (a + b) / 2.0).collect(),
        ..i_n
    };
    let full = combined.resample(image.width(), image.height(), 0.5f64.powi(MAP_LEVEL as i32));
    let map = AttentionMap::new(image.height(), image.width(), full.data)?;
    Ok(normalize01(&map))
}
