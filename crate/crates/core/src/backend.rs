//! Producers of feature maps for target and search images.
//!
//! Two backends are provided: [`PrecomputedBackend`] reads `IVSNT1` files
//! exported from a pretrained network, and [`RandomConvBackend`] runs a small
//! rectified convolution stack with Gaussian weights.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Scale};

/// Side of the square tiles large search images are cut into.
pub const TILE_SIZE: usize = 224;

/// Pixels per degree of visual angle on the reference display.
pub const DEFAULT_PIXELS_PER_DEGREE: f64 = 32.0;

/// Index of a layer in the reference 16-layer architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LayerId(u8);

/// `(target layer, search layer)` pairs, top of the hierarchy first.
pub const LAYER_PAIRS: [(u8, u8); 5] = [(31, 30), (24, 23), (17, 16), (10, 9), (5, 4)];

impl LayerId {
    pub const TOP: LayerId = LayerId(31);
    pub const BELOW_TOP: LayerId = LayerId(30);

    pub fn new(index: u8) -> Result<Self> {
        if LAYER_PAIRS.iter().any(|&(t, s)| t == index || s == index) {
            Ok(LayerId(index))
        } else {
            Err(Error::Parameter(format!("unsupported layer {index}")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Position of this layer's pair counted from the top (0 for 31/30) and
    /// whether it is the pooled member of the pair.
    fn block(self) -> (usize, bool) {
        let (i, &(t, _)) = LAYER_PAIRS
            .iter()
            .enumerate()
            .find(|(_, &(t, s))| t == self.0 || s == self.0)
            .expect("validated on construction");
        (i, t == self.0)
    }
}

impl TryFrom<u8> for LayerId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        LayerId::new(v)
    }
}

impl From<LayerId> for u8 {
    fn from(l: LayerId) -> u8 {
        l.0
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    id: String,
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    pixels_per_degree: f64,
}

impl GrayImage {
    pub fn new(id: impl Into<String>, width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension("image must be at least 1x1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Parameter("intensities must lie in [0, 1]".into()));
        }
        Ok(GrayImage {
            id: id.into(),
            width,
            height,
            pixels,
            pixels_per_degree: DEFAULT_PIXELS_PER_DEGREE,
        })
    }

    pub fn filled(id: impl Into<String>, width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(id, width, height, vec![value; width * height])
    }

    pub fn open(path: impl AsRef<Path>, id: impl Into<String>) -> Result<Self> {
        let img = image::open(path.as_ref())?.to_luma32f();
        let (w, h) = img.dimensions();
        let pixels = img
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v).clamp(0.0, 1.0))
            .collect();
        Self::new(id, w as usize, h as usize, pixels)
    }

    pub fn with_pixels_per_degree(mut self, ppd: f64) -> Self {
        self.pixels_per_degree = ppd;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_per_degree(&self) -> f64 {
        self.pixels_per_degree
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// Copies the `w` x `h` region at `(x0, y0)`; the region must lie inside the image.
    pub fn crop(&self, id: impl Into<String>, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimension(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            pixels.extend_from_slice(&self.pixels[y * self.width + x0..][..w]);
        }
        Ok(GrayImage {
            id: id.into(),
            width: w,
            height: h,
            pixels,
            pixels_per_degree: self.pixels_per_degree,
        })
    }

    /// Bilinear resize.
    pub fn resized(&self, width: usize, height: usize) -> GrayImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let buf = image::ImageBuffer::<image::Luma<f32>, Vec<f32>>::from_raw(
            self.width as u32,
            self.height as u32,
            self.pixels.iter().map(|&v| v as f32).collect(),
        )
        .expect("buffer length matches dimensions");
        let out = image::imageops::resize(
            &buf,
            width as u32,
            height as u32,
            image::imageops::FilterType::Triangle,
        );
        GrayImage {
            id: self.id.clone(),
            width,
            height,
            pixels: out
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v).clamp(0.0, 1.0))
                .collect(),
            pixels_per_degree: self.pixels_per_degree,
        }
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([(self.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }
}

/// One tile of a larger image with its pixel offset in the parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub image: GrayImage,
    pub offset_x: usize,
    pub offset_y: usize,
}

/// Id given to the tile at `(offset_x, offset_y)` of image `id`.
pub fn tile_id(id: &str, offset_x: usize, offset_y: usize) -> String {
    format!("{id}_x{offset_x}_y{offset_y}")
}

/// Cuts `image` into non-overlapping `tile` x `tile` pieces in row-major
/// order. Right and bottom remainders keep their natural size. An image that
/// fits in one tile is returned whole under its own id.
pub fn tile_image(image: &GrayImage, tile: usize) -> Vec<Tile> {
    assert!(tile > 0, "tile size must be positive");
    if image.width <= tile && image.height <= tile {
        return vec![Tile {
            image: image.clone(),
            offset_x: 0,
            offset_y: 0,
        }];
    }
    let mut tiles = Vec::new();
    for oy in (0..image.height).step_by(tile) {
        for ox in (0..image.width).step_by(tile) {
            let w = tile.min(image.width - ox);
            let h = tile.min(image.height - oy);
            let piece = image
                .crop(tile_id(&image.id, ox, oy), ox, oy, w, h)
                .expect("tile lies inside image");
            tiles.push(Tile {
                image: piece,
                offset_x: ox,
                offset_y: oy,
            });
        }
    }
    tiles
}

/// Source of network activations. Implementations are immutable and shared
/// read-only across threads; the same instance must serve target and search
/// images.
pub trait FeatureBackend: Send + Sync {
    fn extract(&self, image: &GrayImage, layer: LayerId) -> Result<FeatureMap>;

    /// Top-level classification vector used for recognition decisions.
    fn classify(&self, image: &GrayImage) -> Result<Vec<f64>>;

    fn describe(&self) -> String;
}

impl<B: FeatureBackend + ?Sized> FeatureBackend for Arc<B> {
    fn extract(&self, image: &GrayImage, layer: LayerId) -> Result<FeatureMap> {
        (**self).extract(image, layer)
    }
    fn classify(&self, image: &GrayImage) -> Result<Vec<f64>> {
        (**self).classify(image)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Reads `<dir>/<image-id>_layer<L>.ivsnt`; classification vectors come from
/// `<dir>/<image-id>_classifier.ivsnt`.
#[derive(Clone, Debug)]
pub struct PrecomputedBackend {
    dir: PathBuf,
}

impl PrecomputedBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PrecomputedBackend { dir: dir.into() }
    }

    pub fn feature_path(&self, image_id: &str, layer: LayerId) -> PathBuf {
        self.dir.join(format!("{image_id}_layer{layer}.ivsnt"))
    }

    pub fn classifier_path(&self, image_id: &str) -> PathBuf {
        self.dir.join(format!("{image_id}_classifier.ivsnt"))
    }

    fn load(&self, image_id: &str, layer: String, path: PathBuf) -> Result<FeatureMap> {
        if !path.exists() {
            return Err(Error::MissingFeatures {
                image_id: image_id.to_string(),
                layer,
                path,
            });
        }
        FeatureMap::load(&path).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

impl FeatureBackend for PrecomputedBackend {
    fn extract(&self, image: &GrayImage, layer: LayerId) -> Result<FeatureMap> {
        let path = self.feature_path(&image.id, layer);
        self.load(&image.id, layer.to_string(), path)
    }

    fn classify(&self, image: &GrayImage) -> Result<Vec<f64>> {
        let path = self.classifier_path(&image.id);
        Ok(self.load(&image.id, "classifier".into(), path)?.data().to_vec())
    }

    fn describe(&self) -> String {
        format!("precomputed:{}", self.dir.display())
    }
}

/// Holds feature maps keyed by `(image id, layer)`; for tests and synthetic
/// trials.
#[derive(Clone, Debug, Default)]
pub struct InMemoryBackend {
    maps: HashMap<(String, LayerId), FeatureMap>,
    vectors: HashMap<String, Vec<f64>>,
}

impl InMemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: impl Into<String>, layer: LayerId, map: FeatureMap) {
        self.maps.insert((image_id.into(), layer), map);
    }

    pub fn insert_vector(&mut self, image_id: impl Into<String>, v: Vec<f64>) {
        self.vectors.insert(image_id.into(), v);
    }
}

impl FeatureBackend for InMemoryBackend {
    fn extract(&self, image: &GrayImage, layer: LayerId) -> Result<FeatureMap> {
        self.maps
            .get(&(image.id.clone(), layer))
            .cloned()
            .ok_or_else(|| Error::MissingFeatures {
                image_id: image.id.clone(),
                layer: layer.to_string(),
                path: PathBuf::from("<memory>"),
            })
    }

    fn classify(&self, image: &GrayImage) -> Result<Vec<f64>> {
        self.vectors
            .get(&image.id)
            .cloned()
            .ok_or_else(|| Error::MissingFeatures {
                image_id: image.id.clone(),
                layer: "classifier".into(),
                path: PathBuf::from("<memory>"),
            })
    }

    fn describe(&self) -> String {
        "in-memory".into()
    }
}

/// One rectified convolution stage followed by max pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
}

impl ConvStage {
    pub const fn new(channels: usize, kernel: usize, stride: usize, pool: usize) -> Self {
        ConvStage {
            channels,
            kernel,
            stride,
            pool,
        }
    }
}

/// Three stages whose pooled output has 512 channels at 1/16 resolution.
pub const DEFAULT_STAGES: [ConvStage; 3] = [
    ConvStage::new(64, 3, 2, 2),
    ConvStage::new(128, 3, 1, 2),
    ConvStage::new(512, 3, 1, 2),
];

/// Parameters of a [`RandomConvBackend`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomConvConfig {
    pub weight_seed: u64,
    #[serde(default)]
    pub weight_mean: f64,
    #[serde(default = "default_weight_sd")]
    pub weight_sd: f64,
    #[serde(default = "default_stages")]
    pub stages: Vec<ConvStage>,
}

fn default_weight_sd() -> f64 {
    1000.0
}

fn default_stages() -> Vec<ConvStage> {
    DEFAULT_STAGES.to_vec()
}

impl RandomConvConfig {
    pub fn new(weight_seed: u64) -> Self {
        RandomConvConfig {
            weight_seed,
            weight_mean: 0.0,
            weight_sd: default_weight_sd(),
            stages: default_stages(),
        }
    }
}

/// Convolution stack with i.i.d. Gaussian weights and zero biases.
///
/// Each stage is a zero-padded ("same") correlation with the given stride,
/// a rectifier, then `pool` x `pool` max pooling. For a layer pair, the pooled
/// output of a stage is the upper layer and the rectified pre-pool map is the
/// lower one; the top pair maps to the last stage and lower pairs to earlier
/// stages (clamped at the first).
#[derive(Clone, Debug)]
pub struct RandomConvBackend {
    config: RandomConvConfig,
    weights: Vec<Vec<f64>>,
}

impl RandomConvBackend {
    pub fn new(config: RandomConvConfig) -> Result<Self> {
        if config.stages.is_empty() {
            return Err(Error::Parameter("random-conv needs at least one stage".into()));
        }
        if config.stages.iter().any(|s| s.channels == 0 || s.kernel == 0 || s.stride == 0 || s.pool == 0) {
            return Err(Error::Parameter("stage parameters must be positive".into()));
        }
        let normal = Normal::new(config.weight_mean, config.weight_sd)
            .map_err(|e| Error::Parameter(format!("weight distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.weight_seed);
        let mut in_channels = 1;
        let weights = config
            .stages
            .iter()
            .map(|s| {
                let n = s.channels * in_channels * s.kernel * s.kernel;
                in_channels = s.channels;
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            })
            .collect();
        Ok(RandomConvBackend { config, weights })
    }

    pub fn config(&self) -> &RandomConvConfig {
        &self.config
    }

    /// Weights of stage `i`, laid out `[out][in][row][col]`.
    pub fn stage_weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    fn stage_for(&self, layer: LayerId) -> (usize, bool) {
        let (block, pooled) = layer.block();
        let last = self.config.stages.len() - 1;
        (last - block.min(last), pooled)
    }

    /// Runs the stack up to `stage` and returns (pre-pool, pooled) maps.
    fn forward(&self, image: &GrayImage, stage: usize) -> Result<(FeatureMap, FeatureMap)> {
        let mut current = FeatureMap::new(1, image.height, image.width, image.pixels.clone(), Scale::ONE)?;
        let mut result = None;
        for (i, spec) in self.config.stages.iter().enumerate().take(stage + 1) {
            let conv = conv_same_relu(&current, spec, &self.weights[i])?;
            let pooled = max_pool(&conv, spec.pool)?;
            if i == stage {
                result = Some((conv, pooled));
                break;
            }
            current = pooled;
        }
        Ok(result.expect("stage index within stack"))
    }
}

impl FeatureBackend for RandomConvBackend {
    fn extract(&self, image: &GrayImage, layer: LayerId) -> Result<FeatureMap> {
        let (stage, pooled) = self.stage_for(layer);
        let (conv, pool) = self.forward(image, stage)?;
        Ok(if pooled { pool } else { conv })
    }

    fn classify(&self, image: &GrayImage) -> Result<Vec<f64>> {
        let top = self.extract(image, LayerId::TOP)?;
        let n = (top.height() * top.width()) as f64;
        Ok((0..top.channels())
            .map(|c| top.channel(c).iter().sum::<f64>() / n)
            .collect())
    }

    fn describe(&self) -> String {
        format!(
            "random-conv:seed={}:sd={}",
            self.config.weight_seed, self.config.weight_sd
        )
    }
}

fn conv_same_relu(input: &FeatureMap, spec: &ConvStage, weights: &[f64]) -> Result<FeatureMap> {
    let (h, w, k, s) = (input.height(), input.width(), spec.kernel, spec.stride);
    let pad = k / 2;
    let out_h = (h + 2 * pad - k) / s + 1;
    let out_w = (w + 2 * pad - k) / s + 1;
    if h + 2 * pad < k || w + 2 * pad < k {
        return Err(Error::Dimension(format!("{h}x{w} input too small for {k}x{k} kernel")));
    }
    let in_c = input.channels();
    let mut data = vec![0.0; spec.channels * out_h * out_w];
    for (o, plane) in data.chunks_exact_mut(out_h * out_w).enumerate() {
        for i in 0..in_c {
            let src = input.channel(i);
            let kern = &weights[(o * in_c + i) * k * k..][..k * k];
            for kr in 0..k {
                for kc in 0..k {
                    let wv = kern[kr * k + kc];
                    for r in 0..out_h {
                        let y = (r * s + kr) as isize - pad as isize;
                        if y < 0 || y as usize >= h {
                            continue;
                        }
                        let src_row = &src[y as usize * w..][..w];
                        let dst_row = &mut plane[r * out_w..][..out_w];
                        for (c, d) in dst_row.iter_mut().enumerate() {
                            let x = (c * s + kc) as isize - pad as isize;
                            if x >= 0 && (x as usize) < w {
                                *d += wv * src_row[x as usize];
                            }
                        }
                    }
                }
            }
        }
        for v in plane.iter_mut() {
            *v = v.max(0.0);
        }
    }
    FeatureMap::new(spec.channels, out_h, out_w, data, input.scale().times(s as u32))
}

fn max_pool(input: &FeatureMap, pool: usize) -> Result<FeatureMap> {
    if pool == 1 {
        return Ok(input.clone());
    }
    let (h, w) = (input.height() / pool, input.width() / pool);
    if h == 0 || w == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} map too small for {pool}x{pool} pooling",
            input.height(),
            input.width()
        )));
    }
    let mut data = Vec::with_capacity(input.channels() * h * w);
    for c in 0..input.channels() {
        let src = input.channel(c);
        for r in 0..h {
            for col in 0..w {
                let mut m = f64::NEG_INFINITY;
                for dr in 0..pool {
                    for dc in 0..pool {
                        m = m.max(src[(r * pool + dr) * input.width() + col * pool + dc]);
                    }
                }
                data.push(m);
            }
        }
    }
    FeatureMap::new(input.channels(), h, w, data, input.scale().times(pool as u32))
}

/// Serializable choice of backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    PrecomputedFile { dir: PathBuf },
    RandomConv(RandomConvConfig),
}

impl BackendSpec {
    pub fn build(&self) -> Result<Arc<dyn FeatureBackend>> {
        Ok(match self {
            BackendSpec::PrecomputedFile { dir } => Arc::new(PrecomputedBackend::new(dir.clone())),
            BackendSpec::RandomConv(cfg) => Arc::new(RandomConvBackend::new(cfg.clone())?),
        })
    }
}
