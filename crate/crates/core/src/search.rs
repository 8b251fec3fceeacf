//! Fixation generation: IVSN, its variants and the baseline models, each
//! turning a [`Trial`] into a [`Scanpath`].
//!
//! Every map-based policy follows the same loop: build the attention map for
//! the current step, pick the winner, ask the stop rule whether the target
//! was found, and otherwise apply inhibition of return. On object-array
//! experiments the winner is chosen among the six object positions by reading
//! the maximum of the map over each object's region.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    attention_for_images, MemoryFunction, ModulationConfig,
    RecoveryCurve, SizeConstraint, SizePrior, DEFAULT_SIZE_WEIGHT,
};
use crate::backend::{
    ConvStage, FeatureBackend, GrayImage, RandomConvBackend, RandomConvConfig,
    DEFAULT_PIXELS_PER_DEGREE, DEFAULT_STAGES,
};
use crate::error::{Error, Result};
use crate::saliency::ittikoch_saliency;
use crate::template::{template_attention, TEMPLATE_SIZE};
use crate::tensor::{argmax_available, AttentionMap, PixelWindow};

/// Display geometry shared by all experiments.
pub const DISPLAY_WIDTH: usize = 1280;
pub const DISPLAY_HEIGHT: usize = 1024;

/// Object arrays: six objects on a circle of this eccentricity.
pub const ARRAY_RADIUS_DEG: f64 = 10.5;
pub const ARRAY_OBJECT_SIZE: u32 = 156;
pub const ARRAY_POSITIONS: usize = 6;
/// Largest box around an object position that still counts as that object
/// for the target centre; matches the array oracle window.
pub const ARRAY_TARGET_TOLERANCE: u32 = 45;

pub const RECOGNITION_THRESHOLD: f64 = 0.9;
pub const SLIDING_STRIDE: usize = 28;
pub const CHANCE_REPETITIONS: usize = 100;
pub const RANWEIGHT_REPETITIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    /// Object arrays.
    Exp1,
    /// Natural images.
    Exp2,
    /// Waldo images.
    Exp3,
    /// Novel-object arrays, same layout as `Exp1`.
    Exp4,
}

impl Experiment {
    pub fn is_object_array(self) -> bool {
        matches!(self, Experiment::Exp1 | Experiment::Exp4)
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" | "1" => Ok(Experiment::Exp1),
            "exp2" | "2" => Ok(Experiment::Exp2),
            "exp3" | "3" => Ok(Experiment::Exp3),
            "exp4" | "4" => Ok(Experiment::Exp4),
            _ => Err(Error::Parameter(format!("unknown experiment `{s}`"))),
        }
    }
}

/// Per-experiment geometry and budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Side of the inhibition-of-return window, pixels.
    pub ior_window: u32,
    /// Side of the oracle / recognition window, pixels.
    pub recognition_window: u32,
    /// Stand-in for the trial time limit.
    pub max_fixations: usize,
    pub pixels_per_degree: f64,
    /// Side of the region each array object occupies.
    pub object_region: u32,
    /// Order in which the sliding window visits array positions.
    pub scan_order: Vec<usize>,
    /// Where the eye rests before the first saccade; image centre if unset.
    #[serde(default)]
    pub initial_fixation: Option<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn for_experiment(exp: Experiment) -> Self {
        let (window, budget) = match exp {
            Experiment::Exp1 | Experiment::Exp4 => (45, ARRAY_POSITIONS),
            Experiment::Exp2 => (200, 80),
            Experiment::Exp3 => (100, 80),
        };
        ExperimentConfig {
            ior_window: window,
            recognition_window: window,
            max_fixations: budget,
            pixels_per_degree: DEFAULT_PIXELS_PER_DEGREE,
            object_region: ARRAY_OBJECT_SIZE,
            scan_order: (0..ARRAY_POSITIONS).collect(),
            initial_fixation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ior_window == 0 || self.recognition_window == 0 || self.object_region == 0 {
            return Err(Error::Parameter("windows must be positive".into()));
        }
        if self.max_fixations == 0 {
            return Err(Error::Parameter("fixation budget must be at least 1".into()));
        }
        if self.pixels_per_degree <= 0.0 {
            return Err(Error::Parameter("pixels per degree must be positive".into()));
        }
        Ok(())
    }
}

/// Centres of the six array objects for an image of the given size,
/// starting at 3 o'clock and proceeding clockwise on screen.
pub fn array_positions(width: usize, height: usize, pixels_per_degree: f64) -> Vec<(i64, i64)> {
    let r = ARRAY_RADIUS_DEG * pixels_per_degree;
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    (0..ARRAY_POSITIONS)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / ARRAY_POSITIONS as f64;
            ((cx + r * a.cos()).round() as i64, (cy + r * a.sin()).round() as i64)
        })
        .collect()
}

/// One search problem.
#[derive(Clone, Debug)]
pub struct Trial {
    pub id: String,
    pub experiment: Experiment,
    pub target: GrayImage,
    pub search: GrayImage,
    /// Ground-truth bounding box of the target in the search image.
    pub target_bbox: PixelWindow,
    /// Object centres for array experiments, empty otherwise.
    pub object_positions: Vec<(i64, i64)>,
}

impl Trial {
    pub fn new(
        id: impl Into<String>,
        experiment: Experiment,
        target: GrayImage,
        search: GrayImage,
        target_bbox: PixelWindow,
        object_positions: Vec<(i64, i64)>,
    ) -> Result<Self> {
        let id = id.into();
        let (x0, x1, y0, y1) = target_bbox.bounds();
        if x0 < 0 || y0 < 0 || x1 > search.width() as i64 || y1 > search.height() as i64 {
            return Err(Error::Parameter(format!(
                "trial {id}: target box {target_bbox:?} outside {}x{} image",
                search.width(),
                search.height()
            )));
        }
        if experiment.is_object_array() {
            if object_positions.len() != ARRAY_POSITIONS {
                return Err(Error::Parameter(format!(
                    "trial {id}: object arrays need {ARRAY_POSITIONS} positions, got {}",
                    object_positions.len()
                )));
            }
            let (cx, cy) = (target_bbox.center_x, target_bbox.center_y);
            let hits = object_positions
                .iter()
                .filter(|&&(x, y)| PixelWindow::square(x, y, ARRAY_TARGET_TOLERANCE).contains(cx, cy))
                .count();
            if hits != 1 {
                return Err(Error::Parameter(format!(
                    "trial {id}: target centre must lie on exactly one object position"
                )));
            }
        }
        Ok(Trial {
            id,
            experiment,
            target,
            search,
            target_bbox,
            object_positions,
        })
    }

    pub fn target_center(&self) -> (i64, i64) {
        (self.target_bbox.center_x, self.target_bbox.center_y)
    }

    pub fn oracle_window(&self, cfg: &ExperimentConfig) -> PixelWindow {
        let (x, y) = self.target_center();
        PixelWindow::square(x, y, cfg.recognition_window)
    }

    fn start(&self, cfg: &ExperimentConfig) -> (f64, f64) {
        cfg.initial_fixation.unwrap_or((
            (self.search.width() / 2) as f64,
            (self.search.height() / 2) as f64,
        ))
    }
}

/// Why a scanpath ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Found,
    /// The fixation budget ran out.
    Budget,
    /// Nothing left to select.
    Exhausted,
    /// The recognizer stopped search away from the target.
    FalseAlarm,
    /// A recorded (human) sequence that never landed on the target.
    NotFound,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::Found => "found",
            Termination::Budget => "budget",
            Termination::Exhausted => "exhausted",
            Termination::FalseAlarm => "false_alarm",
            Termination::NotFound => "not_found",
        };
        f.write_str(s)
    }
}

/// Ordered fixations of one agent on one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub trial_id: String,
    /// Policy label, or `subject:<id>` for recorded sequences.
    pub policy: String,
    pub seed: u64,
    pub fixations: Vec<(f64, f64)>,
    pub found: bool,
    /// 1-based number of the fixation that found the target.
    pub found_at: Option<usize>,
    pub termination: Termination,
}

impl Scanpath {
    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }
}

/// A search strategy and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchPolicy {
    /// Target-modulated attention with winner-take-all and permanent IOR;
    /// non-default layer pairs give the layer-pair variants.
    Ivsn {
        #[serde(default)]
        layers: ModulationConfig,
    },
    /// IVSN stopping on a feature-distance recognizer instead of the oracle.
    IvsnRecognition {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// IVSN with decaying inhibition of return.
    IvsnFiniteIor { curve: RecoveryCurve },
    /// IVSN with a saccade-size prior mixed into the map.
    IvsnSize { constraint: SizeConstraint },
    Chance,
    SlidingWindow {
        #[serde(default = "default_stride")]
        stride: usize,
    },
    TemplateMatching {
        #[serde(default = "default_template")]
        template_size: usize,
    },
    IttiKoch,
    /// IVSN on a Gaussian random-weight network seeded per repetition.
    RanWeight {
        #[serde(default = "default_sd")]
        weight_sd: f64,
        #[serde(default = "default_stages")]
        stages: Vec<ConvStage>,
    },
}

fn default_threshold() -> f64 {
    RECOGNITION_THRESHOLD
}
fn default_stride() -> usize {
    SLIDING_STRIDE
}
fn default_template() -> usize {
    TEMPLATE_SIZE
}
fn default_sd() -> f64 {
    1000.0
}
fn default_stages() -> Vec<ConvStage> {
    DEFAULT_STAGES.to_vec()
}

/// Exponential recovery used when no human data is available to fit one.
pub const DEFAULT_RECOVERY: RecoveryCurve = RecoveryCurve::Exponential { beta: 1.0, tau: 4.0 };

/// Gamma with the moments of the natural-image human saccades (7.6 +- 5.7 deg).
pub fn default_size_constraint() -> SizeConstraint {
    let (mean, sd) = (7.6f64, 5.7f64);
    SizeConstraint::new(DEFAULT_SIZE_WEIGHT, (mean / sd).powi(2), sd * sd / mean)
        .expect("valid constants")
}

impl SearchPolicy {
    pub fn ivsn() -> Self {
        SearchPolicy::Ivsn {
            layers: ModulationConfig::default(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SearchPolicy::Ivsn { layers } if *layers == ModulationConfig::default() => "ivsn".into(),
            SearchPolicy::Ivsn { layers } => format!("ivsn_{}_{}", layers.target_layer, layers.search_layer),
            SearchPolicy::IvsnRecognition { .. } => "ivsn_recognition".into(),
            SearchPolicy::IvsnFiniteIor { .. } => "ivsn_fior".into(),
            SearchPolicy::IvsnSize { .. } => "ivsn_size".into(),
            SearchPolicy::Chance => "chance".into(),
            SearchPolicy::SlidingWindow { .. } => "sliding_window".into(),
            SearchPolicy::TemplateMatching { .. } => "template_matching".into(),
            SearchPolicy::IttiKoch => "itti_koch".into(),
            SearchPolicy::RanWeight { .. } => "ranweight".into(),
        }
    }

    /// Seeds run per trial: the stochastic baselines are averaged over
    /// repetitions.
    pub fn repetitions(&self) -> usize {
        match self {
            SearchPolicy::Chance => CHANCE_REPETITIONS,
            SearchPolicy::RanWeight { .. } => RANWEIGHT_REPETITIONS,
            _ => 1,
        }
    }

    pub fn needs_features(&self) -> bool {
        matches!(
            self,
            SearchPolicy::Ivsn { .. }
                | SearchPolicy::IvsnRecognition { .. }
                | SearchPolicy::IvsnFiniteIor { .. }
                | SearchPolicy::IvsnSize { .. }
        )
    }

    /// Whether visited locations stay suppressed for good.
    pub fn has_infinite_ior(&self) -> bool {
        !matches!(
            self,
            SearchPolicy::IvsnFiniteIor { .. } | SearchPolicy::SlidingWindow { .. }
        )
    }
}

impl FromStr for SearchPolicy {
    type Err = Error;

    /// Parses a policy label; parameterized variants get their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "ivsn" => SearchPolicy::ivsn(),
            "ivsn_recognition" => SearchPolicy::IvsnRecognition {
                threshold: RECOGNITION_THRESHOLD,
            },
            "ivsn_fior" => SearchPolicy::IvsnFiniteIor {
                curve: DEFAULT_RECOVERY,
            },
            "ivsn_size" => SearchPolicy::IvsnSize {
                constraint: default_size_constraint(),
            },
            "chance" => SearchPolicy::Chance,
            "sliding_window" | "sw" => SearchPolicy::SlidingWindow {
                stride: SLIDING_STRIDE,
            },
            "template_matching" | "tm" => SearchPolicy::TemplateMatching {
                template_size: TEMPLATE_SIZE,
            },
            "itti_koch" | "ittikoch" => SearchPolicy::IttiKoch,
            "ranweight" => SearchPolicy::RanWeight {
                weight_sd: default_sd(),
                stages: default_stages(),
            },
            other => {
                let pair = other
                    .strip_prefix("ivsn_")
                    .and_then(|rest| rest.split_once('_'))
                    .and_then(|(t, _)| t.parse::<u8>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown policy `{other}`")))?;
                let layers = ModulationConfig::from_target_layer(pair)?;
                if format!("ivsn_{}_{}", layers.target_layer, layers.search_layer) != other {
                    return Err(Error::Parameter(format!("unknown policy `{other}`")));
                }
                SearchPolicy::Ivsn { layers }
            }
        })
    }
}

/// True iff the fixation lies inside the oracle window centred on the target.
pub fn oracle_check(fixation: (f64, f64), trial: &Trial, cfg: &ExperimentConfig) -> bool {
    trial
        .oracle_window(cfg)
        .contains(fixation.0.round() as i64, fixation.1.round() as i64)
}

/// Euclidean distance between the L2-normalized vectors; `None` if either is
/// zero.
pub fn recognition_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(
        a.iter()
            .zip(b)
            .map(|(x, y)| (x / na - y / nb).powi(2))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Distance-threshold decision between two classification vectors.
pub fn recognizes(target: &[f64], crop: &[f64], threshold: f64) -> bool {
    recognition_distance(target, crop).is_some_and(|d| d < threshold)
}

/// Crop of the recognition window around `fixation`, clipped to the image.
pub fn recognition_crop(fixation: (f64, f64), trial: &Trial, cfg: &ExperimentConfig) -> Result<GrayImage> {
    let (x, y) = (fixation.0.round() as i64, fixation.1.round() as i64);
    let win = PixelWindow::square(x, y, cfg.recognition_window);
    let (x0, x1, y0, y1) = win
        .clip(trial.search.width(), trial.search.height())
        .ok_or_else(|| Error::Parameter(format!("fixation ({x}, {y}) outside image")))?;
    trial.search.crop(
        format!("{}_crop_x{x}_y{y}_s{}", trial.search.id(), cfg.recognition_window),
        x0,
        y0,
        x1 - x0,
        y1 - y0,
    )
}

/// Recognition decision at a fixation using the backend's classification
/// vectors.
pub fn recognition_check(
    fixation: (f64, f64),
    trial: &Trial,
    cfg: &ExperimentConfig,
    backend: &dyn FeatureBackend,
    threshold: f64,
) -> Result<bool> {
    let target = backend.classify(&trial.target)?;
    let crop = backend.classify(&recognition_crop(fixation, trial, cfg)?)?;
    Ok(recognizes(&target, &crop, threshold))
}

/// Window centres of a raster scan from the top-left corner.
pub fn raster_centers(width: usize, height: usize, window: u32, stride: usize) -> Vec<(i64, i64)> {
    let axis = |len: usize| -> Vec<i64> {
        let win = window as usize;
        if len <= win {
            return vec![(len / 2) as i64];
        }
        (0..=len - win)
            .step_by(stride.max(1))
            .map(|left| (left + win / 2) as i64)
            .collect()
    };
    let xs = axis(width);
    axis(height)
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

fn finish(trial: &Trial, policy: &SearchPolicy, seed: u64, fixations: Vec<(f64, f64)>, termination: Termination) -> Scanpath {
    let found = termination == Termination::Found;
    Scanpath {
        trial_id: trial.id.clone(),
        policy: policy.label(),
        seed,
        found_at: found.then_some(fixations.len()),
        fixations,
        found,
        termination,
    }
}

/// Sliding-window baseline: array positions in scan order, or a raster of
/// window centres with the given stride.
pub fn sliding_window_path(trial: &Trial, cfg: &ExperimentConfig, stride: usize) -> Scanpath {
    let policy = SearchPolicy::SlidingWindow { stride };
    let centres: Vec<(i64, i64)> = if trial.experiment.is_object_array() {
        cfg.scan_order
            .iter()
            .filter_map(|&i| trial.object_positions.get(i).copied())
            .collect()
    } else {
        raster_centers(trial.search.width(), trial.search.height(), cfg.recognition_window, stride)
    };
    let mut fixations = Vec::new();
    for (x, y) in centres.into_iter().take(cfg.max_fixations) {
        let f = (x as f64, y as f64);
        fixations.push(f);
        if oracle_check(f, trial, cfg) {
            return finish(trial, &policy, 0, fixations, Termination::Found);
        }
    }
    let end = if fixations.len() == cfg.max_fixations {
        Termination::Budget
    } else {
        Termination::Exhausted
    };
    finish(trial, &policy, 0, fixations, end)
}

/// Pixels still eligible for selection under permanent IOR.
struct Availability {
    width: usize,
    height: usize,
    open: Vec<bool>,
    remaining: usize,
}

impl Availability {
    fn new(width: usize, height: usize) -> Self {
        Availability {
            width,
            height,
            open: vec![true; width * height],
            remaining: width * height,
        }
    }

    fn close(&mut self, win: &PixelWindow) {
        if let Some((x0, x1, y0, y1)) = win.clip(self.width, self.height) {
            for y in y0..y1 {
                for cell in &mut self.open[y * self.width + x0..y * self.width + x1] {
                    if *cell {
                        *cell = false;
                        self.remaining -= 1;
                    }
                }
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        if self.remaining == 0 {
            return None;
        }
        if self.remaining * 20 >= self.open.len() {
            loop {
                let i = rng.gen_range(0..self.open.len());
                if self.open[i] {
                    return Some((i % self.width, i / self.width));
                }
            }
        }
        let k = rng.gen_range(0..self.remaining);
        let i = self
            .open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .nth(k)
            .map(|(i, _)| i)
            .expect("k < remaining");
        Some((i % self.width, i / self.width))
    }
}

/// How the base map is turned into the map used at each step.
enum Composition {
    Plain,
    Finite(MemoryFunction),
    Size(Box<SizePrior>),
}

enum StopRule {
    Oracle,
    Recognition { target: Vec<f64>, threshold: f64 },
}

/// Runs one policy on one trial.
pub fn run_trial(
    trial: &Trial,
    policy: &SearchPolicy,
    cfg: &ExperimentConfig,
    backend: &dyn FeatureBackend,
    seed: u64,
) -> Result<Scanpath> {
    cfg.validate()?;
    match policy {
        SearchPolicy::SlidingWindow { stride } => {
            let mut path = sliding_window_path(trial, cfg, *stride);
            path.seed = seed;
            Ok(path)
        }
        SearchPolicy::Chance => Ok(chance_path(trial, cfg, seed)),
        _ => {
            let base = base_map(trial, policy, backend, seed)?;
            run_with_attention(trial, policy, cfg, backend, seed, base)
        }
    }
}

/// Runs a map-based policy on a precomputed attention map instead of the one
/// the policy would build. The backend is only consulted by the recognition
/// stop rule.
pub fn run_with_attention(
    trial: &Trial,
    policy: &SearchPolicy,
    cfg: &ExperimentConfig,
    backend: &dyn FeatureBackend,
    seed: u64,
    base: AttentionMap,
) -> Result<Scanpath> {
    cfg.validate()?;
    let (composition, stop) = match policy {
        SearchPolicy::Chance | SearchPolicy::SlidingWindow { .. } => {
            return Err(Error::Parameter(format!("{} has no attention map", policy.label())))
        }
        SearchPolicy::IvsnFiniteIor { curve } => (
            Composition::Finite(MemoryFunction::finite(curve.clone())),
            StopRule::Oracle,
        ),
        SearchPolicy::IvsnSize { constraint } => (
            Composition::Size(Box::new(SizePrior::new(
                *constraint,
                cfg.pixels_per_degree,
                trial.search.width(),
                trial.search.height(),
            ))),
            StopRule::Oracle,
        ),
        SearchPolicy::IvsnRecognition { threshold } => (
            Composition::Plain,
            StopRule::Recognition {
                target: backend.classify(&trial.target)?,
                threshold: *threshold,
            },
        ),
        _ => (Composition::Plain, StopRule::Oracle),
    };
    map_search(trial, policy, cfg, backend, seed, base, composition, stop)
}

/// The policy's attention map before any per-step composition.
pub fn base_map(
    trial: &Trial,
    policy: &SearchPolicy,
    backend: &dyn FeatureBackend,
    seed: u64,
) -> Result<AttentionMap> {
    match policy {
        SearchPolicy::Ivsn { layers } => attention_for_images(backend, &trial.target, &trial.search, layers),
        SearchPolicy::IvsnRecognition { .. }
        | SearchPolicy::IvsnFiniteIor { .. }
        | SearchPolicy::IvsnSize { .. } => {
            attention_for_images(backend, &trial.target, &trial.search, &ModulationConfig::default())
        }
        SearchPolicy::TemplateMatching { template_size } => {
            template_attention(&trial.search, &trial.target, *template_size)
        }
        SearchPolicy::IttiKoch => ittikoch_saliency(&trial.search),
        SearchPolicy::RanWeight { weight_sd, stages } => {
            let net = RandomConvBackend::new(RandomConvConfig {
                weight_seed: seed,
                weight_mean: 0.0,
                weight_sd: *weight_sd,
                stages: stages.clone(),
            })?;
            attention_for_images(&net, &trial.target, &trial.search, &ModulationConfig::default())
        }
        SearchPolicy::Chance | SearchPolicy::SlidingWindow { .. } => Err(Error::Parameter(format!(
            "{} has no attention map",
            policy.label()
        ))),
    }
}

fn chance_path(trial: &Trial, cfg: &ExperimentConfig, seed: u64) -> Scanpath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fixations = Vec::new();
    let policy = SearchPolicy::Chance;
    if trial.experiment.is_object_array() {
        let mut left: Vec<usize> = (0..trial.object_positions.len()).collect();
        while fixations.len() < cfg.max_fixations && !left.is_empty() {
            let k = left.remove(rng.gen_range(0..left.len()));
            let (x, y) = trial.object_positions[k];
            let f = (x as f64, y as f64);
            fixations.push(f);
            if oracle_check(f, trial, cfg) {
                return finish(trial, &policy, seed, fixations, Termination::Found);
            }
        }
        let end = if left.is_empty() { Termination::Exhausted } else { Termination::Budget };
        return finish(trial, &policy, seed, fixations, end);
    }

    let mut open = Availability::new(trial.search.width(), trial.search.height());
    while fixations.len() < cfg.max_fixations {
        let Some((x, y)) = open.sample(&mut rng) else {
            return finish(trial, &policy, seed, fixations, Termination::Exhausted);
        };
        let f = (x as f64, y as f64);
        fixations.push(f);
        if oracle_check(f, trial, cfg) {
            return finish(trial, &policy, seed, fixations, Termination::Found);
        }
        open.close(&PixelWindow::square(x as i64, y as i64, cfg.ior_window));
    }
    finish(trial, &policy, seed, fixations, Termination::Budget)
}

#[allow(clippy::too_many_arguments)]
fn map_search(
    trial: &Trial,
    policy: &SearchPolicy,
    cfg: &ExperimentConfig,
    backend: &dyn FeatureBackend,
    seed: u64,
    base: AttentionMap,
    composition: Composition,
    stop: StopRule,
) -> Result<Scanpath> {
    let (w, h) = (base.width(), base.height());
    if (w, h) != (trial.search.width(), trial.search.height()) {
        return Err(Error::Dimension(format!(
            "attention map {w}x{h} does not match search image {}x{}",
            trial.search.width(),
            trial.search.height()
        )));
    }
    let permanent = !matches!(composition, Composition::Finite(_));
    let mut suppressed = base.clone();
    let mut open = Availability::new(w, h);
    let mut visited_objects = vec![0usize; trial.object_positions.len()];
    let mut visits: Vec<Option<usize>> = Vec::new();
    let mut history: Vec<(usize, usize)> = Vec::new();
    let mut fixations: Vec<(f64, f64)> = Vec::new();
    let start = trial.start(cfg);
    let mut current = (start.0 as usize, start.1 as usize);

    while fixations.len() < cfg.max_fixations {
        let map = match &composition {
            Composition::Plain => None,
            Composition::Finite(mem) => Some(crate::attention::apply_memory(&base, &history, mem, cfg.ior_window)),
            Composition::Size(prior) => Some(prior.apply(&suppressed, current)?),
        };
        let map = map.as_ref().unwrap_or(&suppressed);

        let choice = if trial.experiment.is_object_array() {
            pick_object(trial, cfg, map, &visited_objects, &visits, &composition)
        } else if permanent {
            argmax_available(map, &open.open).map(|p| (p, None))
        } else {
            crate::tensor::argmax_pixel(map).map(|p| (p, None))
        };
        let Some(((x, y), object)) = choice else {
            return Ok(finish(trial, policy, seed, fixations, Termination::Exhausted));
        };

        let f = (x as f64, y as f64);
        fixations.push(f);
        match &stop {
            StopRule::Oracle => {
                if oracle_check(f, trial, cfg) {
                    return Ok(finish(trial, policy, seed, fixations, Termination::Found));
                }
            }
            StopRule::Recognition { target, threshold } => {
                let crop = backend.classify(&recognition_crop(f, trial, cfg)?)?;
                if recognizes(target, &crop, *threshold) {
                    let end = if oracle_check(f, trial, cfg) {
                        Termination::Found
                    } else {
                        Termination::FalseAlarm
                    };
                    return Ok(finish(trial, policy, seed, fixations, end));
                }
            }
        }

        let win = PixelWindow::square(x as i64, y as i64, cfg.ior_window);
        if permanent {
            suppressed.suppress(&win);
            open.close(&win);
        }
        if let Some(k) = object {
            visited_objects[k] += 1;
        }
        visits.push(object);
        history.push((x, y));
        current = (x, y);
    }
    Ok(finish(trial, policy, seed, fixations, Termination::Budget))
}

/// Winner among array objects: maximum of the map over each object's region,
/// scaled by memory for finite IOR, visited objects excluded otherwise. Ties
/// go to the lower position index.
fn pick_object(
    trial: &Trial,
    cfg: &ExperimentConfig,
    map: &AttentionMap,
    visited: &[usize],
    visits: &[Option<usize>],
    composition: &Composition,
) -> Option<((usize, usize), Option<usize>)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &(x, y)) in trial.object_positions.iter().enumerate() {
        let region = PixelWindow::square(x, y, cfg.object_region);
        let Some(mut value) = map.window_max(&region) else {
            continue;
        };
        match composition {
            Composition::Finite(MemoryFunction::Finite { curve, .. }) => {
                let now = visits.len();
                for (t, v) in visits.iter().enumerate() {
                    if *v == Some(k) {
                        value *= curve.retain(now - t);
                    }
                }
            }
            _ if visited[k] > 0 => continue,
            _ => {}
        }
        if best.map_or(true, |(_, b)| value > b) {
            best = Some((k, value));
        }
    }
    best.map(|(k, _)| {
        let (x, y) = trial.object_positions[k];
        let x = x.clamp(0, map.width() as i64 - 1) as usize;
        let y = y.clamp(0, map.height() as i64 - 1) as usize;
        ((x, y), Some(k))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::InMemoryBackend;

    fn array_trial(target_pos: usize) -> Trial {
        let search = GrayImage::filled("s", DISPLAY_WIDTH, DISPLAY_HEIGHT, 0.5).unwrap();
        let target = GrayImage::filled("t", 28, 28, 0.5).unwrap();
        let pos = array_positions(DISPLAY_WIDTH, DISPLAY_HEIGHT, 32.0);
        let (x, y) = pos[target_pos];
        Trial::new("a", Experiment::Exp1, target, search, PixelWindow::square(x, y, 156), pos).unwrap()
    }

    fn scene_trial(w: usize, h: usize, centre: (i64, i64), exp: Experiment) -> Trial {
        let search = GrayImage::filled("s", w, h, 0.5).unwrap();
        let target = GrayImage::filled("t", 28, 28, 0.5).unwrap();
        Trial::new("n", exp, target, search, PixelWindow::square(centre.0, centre.1, 100), vec![]).unwrap()
    }

    #[test]
    fn array_geometry() {
        let pos = array_positions(1280, 1024, 32.0);
        assert_eq!(pos.len(), 6);
        assert_eq!(pos[0], (640 + 336, 512));
        for p in &pos {
            let r = ((p.0 - 640) as f64).hypot((p.1 - 512) as f64);
            assert!((r - 336.0).abs() < 1.0);
        }
    }

    #[test]
    fn trial_validation() {
        let pos = array_positions(DISPLAY_WIDTH, DISPLAY_HEIGHT, 32.0);
        let img = GrayImage::filled("s", DISPLAY_WIDTH, DISPLAY_HEIGHT, 0.5).unwrap();
        let t = GrayImage::filled("t", 8, 8, 0.5).unwrap();
        let off = PixelWindow::square(640, 512, 156);
        assert!(Trial::new("x", Experiment::Exp1, t.clone(), img.clone(), off, pos.clone()).is_err());
        assert!(Trial::new("x", Experiment::Exp1, t.clone(), img.clone(), off, pos[..5].to_vec()).is_err());
        let outside = PixelWindow::square(5, 5, 40);
        assert!(Trial::new("x", Experiment::Exp2, t, img, outside, vec![]).is_err());
    }

    #[test]
    fn oracle_examples() {
        let trial = scene_trial(1280, 1024, (640, 512), Experiment::Exp2);
        let cfg = ExperimentConfig::for_experiment(Experiment::Exp2);
        assert!(oracle_check((640.0, 512.0), &trial, &cfg));
        assert!(!oracle_check((640.0 + 101.0, 512.0), &trial, &cfg));
        let cfg1 = ExperimentConfig::for_experiment(Experiment::Exp1);
        assert!(oracle_check((640.0 + 22.0, 512.0), &trial, &cfg1));
        assert!(!oracle_check((640.0 + 23.0, 512.0), &trial, &cfg1));
    }

    #[test]
    fn recognition_geometry() {
        assert_eq!(recognition_distance(&[1.0, 2.0], &[2.0, 4.0]), Some(0.0));
        let d = recognition_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(!recognizes(&[1.0, 0.0], &[0.0, 1.0], 0.9));
        assert!(!recognizes(&[0.0, 0.0], &[0.0, 0.0], 0.9));
    }

    #[test]
    fn policy_labels_round_trip() {
        for name in [
            "ivsn", "ivsn_24_23", "ivsn_5_4", "ivsn_recognition", "ivsn_fior", "ivsn_size", "chance",
            "sliding_window", "template_matching", "itti_koch", "ranweight",
        ] {
            let p: SearchPolicy = name.parse().unwrap();
            assert_eq!(p.label(), name);
        }
        assert!("ivsn_31_29".parse::<SearchPolicy>().is_err());
        assert!("ivsn_24_22".parse::<SearchPolicy>().is_err());
        assert!("greedy".parse::<SearchPolicy>().is_err());
        assert_eq!(SearchPolicy::Chance.repetitions(), 100);
    }

    #[test]
    fn sliding_window_on_arrays() {
        let cfg = ExperimentConfig::for_experiment(Experiment::Exp1);
        let path = sliding_window_path(&array_trial(0), &cfg, 28);
        assert_eq!(path.found_at, Some(1));
        let mut total = 0;
        for k in 0..6 {
            total += sliding_window_path(&array_trial(k), &cfg, 28).found_at.unwrap();
        }
        assert_eq!(total as f64 / 6.0, 3.5);
    }

    #[test]
    fn sliding_window_raster_index() {
        let trial = scene_trial(1280, 1024, (640, 512), Experiment::Exp2);
        let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp2);
        cfg.max_fixations = 10_000;
        let path = sliding_window_path(&trial, &cfg, 28);
        let centres = raster_centers(1280, 1024, 200, 28);
        let expected = centres
            .iter()
            .position(|&(x, y)| trial.oracle_window(&cfg).contains(x, y))
            .unwrap();
        assert_eq!(path.found_at, Some(expected + 1));
        assert_eq!(centres[0], (100, 100));
    }

    #[test]
    fn chance_on_arrays_visits_each_object_once() {
        let cfg = ExperimentConfig::for_experiment(Experiment::Exp1);
        let trial = array_trial(3);
        for seed in 0..50 {
            let p = run_trial(&trial, &SearchPolicy::Chance, &cfg, &InMemoryBackend::new(), seed).unwrap();
            assert!(p.found);
            let mut seen = p.fixations.clone();
            seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            seen.dedup();
            assert_eq!(seen.len(), p.fixations.len());
        }
    }

    #[test]
    fn chance_is_reproducible() {
        let cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
        let trial = scene_trial(400, 300, (200, 150), Experiment::Exp3);
        let b = InMemoryBackend::new();
        let a1 = run_trial(&trial, &SearchPolicy::Chance, &cfg, &b, 9).unwrap();
        let a2 = run_trial(&trial, &SearchPolicy::Chance, &cfg, &b, 9).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn exhaustion_is_reported() {
        // four 100px windows cover a 200x200 image
        let trial = scene_trial(200, 200, (150, 150), Experiment::Exp3);
        let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
        cfg.recognition_window = 1;
        let p = run_trial(&trial, &SearchPolicy::Chance, &cfg, &InMemoryBackend::new(), 1).unwrap();
        assert!(!p.found);
        assert!(matches!(p.termination, Termination::Exhausted | Termination::Found));
    }

    #[test]
    fn template_matching_finds_embedded_patch() {
        let mut s = 5u64;
        let patch: Vec<f64> = (0..28 * 28)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 40) as f64 / (1u64 << 24) as f64
            })
            .collect();
        let target = GrayImage::new("t", 28, 28, patch).unwrap();
        let mut search = GrayImage::filled("s", 400, 300, 0.3).unwrap();
        for y in 0..28 {
            for x in 0..28 {
                search.set(250 + x, 100 + y, target.get(x, y));
            }
        }
        let trial = Trial::new("tm", Experiment::Exp3, target, search, PixelWindow::square(264, 114, 28), vec![]).unwrap();
        let cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
        let policy: SearchPolicy = "template_matching".parse().unwrap();
        let p = run_trial(&trial, &policy, &cfg, &InMemoryBackend::new(), 0).unwrap();
        assert_eq!(p.found_at, Some(1));
    }
}
