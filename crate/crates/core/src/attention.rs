//! Target-modulated attention maps and the memory / saccade-size terms that
//! are combined with them before fixation selection.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma};

use crate::backend::{tile_image, FeatureBackend, GrayImage, LayerId, LAYER_PAIRS, TILE_SIZE};
use crate::error::{Error, Result};
use crate::tensor::{normalize01, xcorr2d_to_pixels, AttentionMap, FeatureMap, PixelWindow};

/// Which target layer modulates which search layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModulationConfig {
    pub target_layer: LayerId,
    pub search_layer: LayerId,
}

impl ModulationConfig {
    pub fn new(target_layer: LayerId, search_layer: LayerId) -> Result<Self> {
        let pair = (target_layer.index(), search_layer.index());
        if !LAYER_PAIRS.contains(&pair) {
            return Err(Error::Parameter(format!(
                "unsupported layer pair {}->{}",
                pair.0, pair.1
            )));
        }
        Ok(ModulationConfig {
            target_layer,
            search_layer,
        })
    }

    /// Pair whose target layer is `target`, e.g. 24 gives 24->23.
    pub fn from_target_layer(target: u8) -> Result<Self> {
        let &(t, s) = LAYER_PAIRS
            .iter()
            .find(|(t, _)| *t == target)
            .ok_or_else(|| Error::Parameter(format!("no layer pair with target layer {target}")))?;
        Self::new(LayerId::new(t)?, LayerId::new(s)?)
    }
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            target_layer: LayerId::TOP,
            search_layer: LayerId::BELOW_TOP,
        }
    }
}

/// Search features for one tile and where the tile sits in the full image.
#[derive(Clone, Debug)]
pub struct SearchTile {
    pub features: FeatureMap,
    pub offset_x: usize,
    pub offset_y: usize,
    pub width: usize,
    pub height: usize,
}

impl SearchTile {
    fn window(&self) -> (usize, usize, usize, usize) {
        (
            self.offset_x,
            self.offset_x + self.width,
            self.offset_y,
            self.offset_y + self.height,
        )
    }
}

/// Correlates the target features against every search tile, concatenates
/// the per-tile maps at their offsets and normalizes the result to `[0, 1]`.
///
/// A tile whose feature map is smaller than the target kernel has no valid
/// placement and contributes zeros.
pub fn compute_attention(
    target: &FeatureMap,
    tiles: &[SearchTile],
    cfg: &ModulationConfig,
    image_width: usize,
    image_height: usize,
) -> Result<AttentionMap> {
    if tiles.is_empty() {
        return Err(Error::Empty("search tiles"));
    }
    for (i, a) in tiles.iter().enumerate() {
        let (ax0, ax1, ay0, ay1) = a.window();
        if ax1 > image_width || ay1 > image_height {
            return Err(Error::Layout(format!(
                "tile at ({}, {}) extends past the {image_width}x{image_height} image",
                a.offset_x, a.offset_y
            )));
        }
        for b in &tiles[i + 1..] {
            let (bx0, bx1, by0, by1) = b.window();
            if ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1 {
                return Err(Error::Layout(format!(
                    "tiles at ({}, {}) and ({}, {})",
                    a.offset_x, a.offset_y, b.offset_x, b.offset_y
                )));
            }
        }
        if a.features.channels() != target.channels() {
            return Err(Error::Dimension(format!(
                "tile at ({}, {}) has {} channels, target has {} (layers {}->{})",
                a.offset_x,
                a.offset_y,
                a.features.channels(),
                target.channels(),
                cfg.target_layer,
                cfg.search_layer
            )));
        }
    }

    let mut full = AttentionMap::zeros(image_height, image_width);
    let values = full.values_mut();
    for tile in tiles {
        if target.height() > tile.features.height() || target.width() > tile.features.width() {
            log::warn!(
                "tile at ({}, {}) is smaller than the target kernel; left at zero",
                tile.offset_x,
                tile.offset_y
            );
            continue;
        }
        let part = xcorr2d_to_pixels(&tile.features, target, tile.height, tile.width)?;
        for y in 0..tile.height {
            let dst = &mut values[(tile.offset_y + y) * image_width + tile.offset_x..][..tile.width];
            dst.copy_from_slice(&part.values()[y * tile.width..][..tile.width]);
        }
    }
    Ok(normalize01(&full))
}

/// Extracts features with `backend` and computes the attention map of
/// `search` for `target`. Targets larger than one tile are resized to
/// 224 x 224; search images are tiled.
pub fn attention_for_images(
    backend: &dyn FeatureBackend,
    target: &GrayImage,
    search: &GrayImage,
    cfg: &ModulationConfig,
) -> Result<AttentionMap> {
    let target = if target.width() > TILE_SIZE || target.height() > TILE_SIZE {
        target.resized(TILE_SIZE, TILE_SIZE)
    } else {
        target.clone()
    };
    let kernel = backend.extract(&target, cfg.target_layer)?;
    let tiles = tile_image(search, TILE_SIZE)
        .into_iter()
        .map(|t| {
            Ok(SearchTile {
                features: backend.extract(&t.image, cfg.search_layer)?,
                offset_x: t.offset_x,
                offset_y: t.offset_y,
                width: t.image.width(),
                height: t.image.height(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    compute_attention(&kernel, &tiles, cfg, search.width(), search.height())
}

/// Fraction of attention retained at a visited location as a function of
/// the number of fixations since the visit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryCurve {
    /// `1 - beta * exp(-lag / tau)`: strongly suppressed right after a visit,
    /// recovering towards 1.
    Exponential { beta: f64, tau: f64 },
    Constant { retain: f64 },
    /// Retained fraction for lags 1, 2, ...; the last entry holds beyond.
    Table { retain: Vec<f64> },
}

impl RecoveryCurve {
    pub fn retain(&self, lag: usize) -> f64 {
        let r = match self {
            RecoveryCurve::Exponential { beta, tau } => 1.0 - beta * (-(lag as f64) / tau).exp(),
            RecoveryCurve::Constant { retain } => *retain,
            RecoveryCurve::Table { retain } => match retain.len() {
                0 => 1.0,
                n => retain[lag.clamp(1, n) - 1],
            },
        };
        r.clamp(0.0, 1.0)
    }
}

/// Inhibition of return for previously fixated locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemoryFunction {
    /// Visited windows are zeroed permanently.
    Infinite,
    Finite {
        curve: RecoveryCurve,
        #[serde(default = "default_revisit_radius")]
        revisit_radius_deg: f64,
    },
}

pub const REVISIT_RADIUS_DEG: f64 = 3.0;

fn default_revisit_radius() -> f64 {
    REVISIT_RADIUS_DEG
}

impl MemoryFunction {
    pub fn finite(curve: RecoveryCurve) -> Self {
        MemoryFunction::Finite {
            curve,
            revisit_radius_deg: REVISIT_RADIUS_DEG,
        }
    }
}

/// Applies memory of the fixations in `history` (oldest first) to `map`. The
/// next fixation is number `history.len() + 1`, so the most recent visit has
/// lag 1.
pub fn apply_memory(
    map: &AttentionMap,
    history: &[(usize, usize)],
    mem: &MemoryFunction,
    ior_side: u32,
) -> AttentionMap {
    let mut out = map.clone();
    let now = history.len();
    for (t, &(x, y)) in history.iter().enumerate() {
        let win = PixelWindow::square(x as i64, y as i64, ior_side);
        match mem {
            MemoryFunction::Infinite => {
                out.suppress(&win);
            }
            MemoryFunction::Finite { curve, .. } => {
                let factor = curve.retain(now - t);
                if let Some((x0, x1, y0, y1)) = win.clip(out.width(), out.height()) {
                    let w = out.width();
                    let values = out.values_mut();
                    for yy in y0..y1 {
                        for v in &mut values[yy * w + x0..yy * w + x1] {
                            *v *= factor;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Least-squares fit of the exponential recovery curve to empirical revisit
/// probabilities (index 0 = lag 1). The curve is scaled so the most likely
/// lag maps to full recovery.
pub fn fit_recovery_curve(revisit_probability: &[f64]) -> Result<RecoveryCurve> {
    let peak = revisit_probability.iter().cloned().fold(0.0, f64::max);
    if revisit_probability.is_empty() || peak <= 0.0 {
        return Err(Error::Empty("revisit probabilities"));
    }
    let target: Vec<f64> = revisit_probability.iter().map(|p| p / peak).collect();
    let loss = |beta: f64, tau: f64| -> f64 {
        let c = RecoveryCurve::Exponential { beta, tau };
        target
            .iter()
            .enumerate()
            .map(|(i, r)| (c.retain(i + 1) - r).powi(2))
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0, 1.0);
    for bi in 0..=200 {
        let beta = bi as f64 / 200.0;
        for ti in 0..=200 {
            let tau = 10f64.powf(-1.0 + 3.0 * ti as f64 / 200.0);
            let l = loss(beta, tau);
            if l < best.0 {
                best = (l, beta, tau);
            }
        }
    }
    Ok(RecoveryCurve::Exponential {
        beta: best.1,
        tau: best.2,
    })
}

/// Bias towards saccades of typical length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeConstraint {
    /// Weight of the feature map; the saccade-size term gets `1 - weight`.
    pub weight: f64,
    pub gamma_shape: f64,
    /// Gamma scale, in degrees.
    pub gamma_scale: f64,
}

pub const DEFAULT_SIZE_WEIGHT: f64 = 0.2346;

impl SizeConstraint {
    pub fn new(weight: f64, gamma_shape: f64, gamma_scale: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Parameter(format!("weight {weight} outside [0, 1]")));
        }
        if gamma_shape <= 0.0 || gamma_scale <= 0.0 {
            return Err(Error::Parameter("gamma parameters must be positive".into()));
        }
        Ok(SizeConstraint {
            weight,
            gamma_shape,
            gamma_scale,
        })
    }

    /// Method-of-moments gamma fit to saccade sizes in degrees.
    pub fn fit(weight: f64, sizes_deg: &[f64]) -> Result<Self> {
        if sizes_deg.len() < 2 {
            return Err(Error::Empty("saccade sizes"));
        }
        let n = sizes_deg.len() as f64;
        let mean = sizes_deg.iter().sum::<f64>() / n;
        let var = sizes_deg.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if mean <= 0.0 || var <= 0.0 {
            return Err(Error::Undefined("saccade size variance is zero"));
        }
        Self::new(weight, mean * mean / var, var / mean)
    }

    pub fn mean_deg(&self) -> f64 {
        self.gamma_shape * self.gamma_scale
    }

    /// Distance of the density peak, in degrees (0 when shape <= 1).
    pub fn mode_deg(&self) -> f64 {
        ((self.gamma_shape - 1.0) * self.gamma_scale).max(0.0)
    }

    fn density(&self) -> Gamma {
        Gamma::new(self.gamma_shape, 1.0 / self.gamma_scale).expect("validated parameters")
    }
}

/// Saccade-size map: gamma density of the distance (degrees) from `current`,
/// rescaled to `[0, 1]`.
pub fn size_constraint_map(
    height: usize,
    width: usize,
    current: (usize, usize),
    sc: &SizeConstraint,
    pixels_per_degree: f64,
) -> AttentionMap {
    let gamma = sc.density();
    let (cx, cy) = (current.0 as f64, current.1 as f64);
    let mut values = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let d = (x as f64 - cx).hypot(y as f64 - cy) / pixels_per_degree;
            let p = gamma.pdf(d);
            values.push(if p.is_finite() { p } else { 0.0 });
        }
    }
    normalize01(&AttentionMap::new(height, width, values).expect("finite densities"))
}

/// `w * map + (1 - w) * M_sc` around the current fixation.
pub fn apply_size_constraint(
    map: &AttentionMap,
    current: (usize, usize),
    sc: &SizeConstraint,
    pixels_per_degree: f64,
) -> AttentionMap {
    let msc = size_constraint_map(map.height(), map.width(), current, sc, pixels_per_degree);
    let w = sc.weight;
    let values = map
        .values()
        .iter()
        .zip(msc.values())
        .map(|(f, s)| w * f + (1.0 - w) * s)
        .collect();
    AttentionMap::new(map.height(), map.width(), values).expect("finite combination")
}

/// [`apply_size_constraint`] for repeated use on one image size: gamma
/// densities are tabulated by integer squared pixel distance.
#[derive(Clone, Debug)]
pub struct SizePrior {
    constraint: SizeConstraint,
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl SizePrior {
    pub fn new(constraint: SizeConstraint, pixels_per_degree: f64, width: usize, height: usize) -> Self {
        let gamma = constraint.density();
        let max_d2 = (width.saturating_sub(1)).pow(2) + (height.saturating_sub(1)).pow(2);
        let table = (0..=max_d2)
            .map(|d2| {
                let p = gamma.pdf((d2 as f64).sqrt() / pixels_per_degree);
                if p.is_finite() {
                    p
                } else {
                    0.0
                }
            })
            .collect();
        SizePrior {
            constraint,
            width,
            height,
            table,
        }
    }

    pub fn constraint(&self) -> &SizeConstraint {
        &self.constraint
    }

    /// `w * map + (1 - w) * M_sc` around `current`; `map` must have the
    /// prior's dimensions.
    pub fn apply(&self, map: &AttentionMap, current: (usize, usize)) -> Result<AttentionMap> {
        if (map.width(), map.height()) != (self.width, self.height) {
            return Err(Error::Dimension(format!(
                "map {}x{} does not match prior {}x{}",
                map.width(),
                map.height(),
                self.width,
                self.height
            )));
        }
        let (cx, cy) = (current.0 as i64, current.1 as i64);
        let mut raw = Vec::with_capacity(self.width * self.height);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in 0..self.height as i64 {
            let dy2 = (y - cy) * (y - cy);
            for x in 0..self.width as i64 {
                let d2 = ((x - cx) * (x - cx) + dy2) as usize;
                let p = self.table.get(d2).copied().unwrap_or(0.0);
                lo = lo.min(p);
                hi = hi.max(p);
                raw.push(p);
            }
        }
        let range = hi - lo;
        let w = self.constraint.weight;
        let values = map
            .values()
            .iter()
            .zip(raw)
            .map(|(f, p)| {
                let s = if range > 0.0 { (p - lo) / range } else { 0.0 };
                w * f + (1.0 - w) * s
            })
            .collect();
        AttentionMap::new(self.height, self.width, values)
    }
}
