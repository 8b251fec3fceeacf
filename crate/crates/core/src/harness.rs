//! Dataset manifests, human fixation ingestion, experiment runs and their
//! on-disk results.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendSpec, FeatureBackend, GrayImage};
use crate::error::{Error, Result};
use crate::metrics::{mean_sd, PerformanceCurve};
use crate::search::{
    run_trial, Experiment, ExperimentConfig, Scanpath, SearchPolicy, Termination, Trial,
};
use crate::tensor::PixelWindow;

pub const MANIFEST_VERSION: u32 = 1;

/// Target bounding box, top-left corner plus size, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn window(&self) -> PixelWindow {
        PixelWindow::new(self.x + (self.w / 2) as i64, self.y + (self.h / 2) as i64, self.w, self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub id: String,
    pub experiment: Experiment,
    pub target_image_path: PathBuf,
    pub search_image_path: PathBuf,
    pub bbox: BBox,
    /// Object centres for array experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp1_positions: Option<Vec<(i64, i64)>>,
    /// Feature-file ids; default to the image file stems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub trials: Vec<TrialEntry>,
    /// Directory relative image paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

impl DatasetManifest {
    pub fn new(trials: Vec<TrialEntry>) -> Result<Self> {
        let m = DatasetManifest {
            version: MANIFEST_VERSION,
            trials,
            root: PathBuf::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), serde_json::to_string_pretty(self)?.as_bytes())
    }

    fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Format(format!("unsupported manifest version {}", self.version)));
        }
        let mut seen = HashSet::new();
        for t in &self.trials {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Format(format!("duplicate trial id `{}`", t.id)));
            }
            if t.bbox.w == 0 || t.bbox.h == 0 {
                return Err(Error::Format(format!("trial {}: empty bounding box", t.id)));
            }
            if t.experiment.is_object_array() && t.exp1_positions.as_ref().map_or(0, Vec::len) != 6 {
                return Err(Error::Format(format!(
                    "trial {}: object-array trials need exactly 6 positions",
                    t.id
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, id: &str) -> Option<&TrialEntry> {
        self.trials.iter().find(|t| t.id == id)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    /// Loads the images of one entry and checks the box against them.
    pub fn load_trial(&self, entry: &TrialEntry) -> Result<Trial> {
        let tp = self.resolve(&entry.target_image_path);
        let sp = self.resolve(&entry.search_image_path);
        let target = GrayImage::open(&tp, entry.target_id.clone().unwrap_or_else(|| stem(&tp)))?;
        let search = GrayImage::open(&sp, entry.search_id.clone().unwrap_or_else(|| stem(&sp)))?;
        Trial::new(
            entry.id.clone(),
            entry.experiment,
            target,
            search,
            entry.bbox.window(),
            entry.exp1_positions.clone().unwrap_or_default(),
        )
    }

    /// Search-image size without decoding the pixels.
    pub fn search_dimensions(&self, entry: &TrialEntry) -> Result<(usize, usize)> {
        let p = self.resolve(&entry.search_image_path);
        let (w, h) = image::image_dimensions(&p)?;
        Ok((w as usize, h as usize))
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

// ---- human fixations ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanFixationRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub fixation_index: u32,
    pub x: f64,
    pub y: f64,
    pub onset_ms: f64,
    pub duration_ms: f64,
}

/// Side of the box within which consecutive fixations are merged.
pub const MERGE_BOX: f64 = 45.0;
/// Merged fixations must last longer than this.
pub const MIN_FIXATION_MS: f64 = 50.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line in the CSV file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_in: usize,
    pub rows_used: usize,
    pub rows_rejected: usize,
    pub rows_merged_away: usize,
    pub rejected_malformed: usize,
    pub rejected_unknown_trial: usize,
    pub rejected_outside_image: usize,
    pub rejected_short: usize,
    pub rejected_initial_center: usize,
    pub rejected_off_object: usize,
    pub rejected_rows: Vec<RejectedRow>,
}

struct Merged {
    x: f64,
    y: f64,
    duration: f64,
}

/// Parses a fixation table and turns each (trial, subject) sequence into a
/// scanpath: merging, dropping of the initial centre fixation and, on object
/// arrays, of fixations off the objects, then the oracle. Fixations after the
/// finding one are kept.
pub fn ingest_human_fixations(
    csv_path: impl AsRef<Path>,
    manifest: &DatasetManifest,
    overrides: &BTreeMap<Experiment, ExperimentConfig>,
) -> Result<(Vec<Scanpath>, IngestReport)> {
    let path = csv_path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    ingest_from_reader(file, manifest, overrides)
}

pub fn ingest_from_reader(
    reader: impl std::io::Read,
    manifest: &DatasetManifest,
    overrides: &BTreeMap<Experiment, ExperimentConfig>,
) -> Result<(Vec<Scanpath>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut groups: BTreeMap<(String, String), Vec<HumanFixationRecord>> = BTreeMap::new();
    let mut dims: HashMap<String, (usize, usize)> = HashMap::new();

    for row in rdr.deserialize::<HumanFixationRecord>() {
        report.rows_in += 1;
        let line = report.rows_in as u64 + 1;
        let rec = match row {
            Ok(r) if r.x.is_finite() && r.y.is_finite() && r.duration_ms >= 0.0 => r,
            Ok(_) => {
                reject(&mut report, line, "non-finite coordinate or negative duration");
                report.rejected_malformed += 1;
                continue;
            }
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                reject(&mut report, line, &format!("malformed row: {e}"));
                report.rejected_malformed += 1;
                continue;
            }
        };
        let Some(entry) = manifest.entry(&rec.trial_id) else {
            reject(&mut report, line, &format!("unknown trial id `{}`", rec.trial_id));
            report.rejected_unknown_trial += 1;
            continue;
        };
        let (w, h) = match dims.get(&rec.trial_id) {
            Some(d) => *d,
            None => {
                let d = manifest.search_dimensions(entry)?;
                dims.insert(rec.trial_id.clone(), d);
                d
            }
        };
        if rec.x < 0.0 || rec.y < 0.0 || rec.x >= w as f64 || rec.y >= h as f64 {
            reject(&mut report, line, "fixation outside the search image");
            report.rejected_outside_image += 1;
            continue;
        }
        groups
            .entry((rec.trial_id.clone(), rec.subject_id.clone()))
            .or_default()
            .push(rec);
    }

    let mut paths = Vec::new();
    for ((trial_id, subject), mut recs) in groups {
        recs.sort_by_key(|r| r.fixation_index);
        let entry = manifest.entry(&trial_id).expect("grouped rows have known trials");
        let cfg = overrides
            .get(&entry.experiment)
            .cloned()
            .unwrap_or_else(|| ExperimentConfig::for_experiment(entry.experiment));
        let (w, h) = dims[&trial_id];

        let mut merged: Vec<Merged> = Vec::new();
        for r in &recs {
            if let Some(m) = merged.last_mut() {
                if (r.x - m.x).abs() <= MERGE_BOX / 2.0 && (r.y - m.y).abs() <= MERGE_BOX / 2.0 {
                    let total = m.duration + r.duration_ms;
                    if total > 0.0 {
                        m.x = (m.x * m.duration + r.x * r.duration_ms) / total;
                        m.y = (m.y * m.duration + r.y * r.duration_ms) / total;
                    }
                    m.duration = total;
                    report.rows_merged_away += 1;
                    continue;
                }
            }
            merged.push(Merged {
                x: r.x,
                y: r.y,
                duration: r.duration_ms,
            });
        }

        let before = merged.len();
        merged.retain(|m| m.duration > MIN_FIXATION_MS);
        report.rejected_short += before - merged.len();

        let centre = PixelWindow::square((w / 2) as i64, (h / 2) as i64, MERGE_BOX as u32);
        let leading = merged
            .iter()
            .take_while(|m| centre.contains(m.x.round() as i64, m.y.round() as i64))
            .count();
        merged.drain(..leading);
        report.rejected_initial_center += leading;

        let mut fixations: Vec<(f64, f64)> = Vec::new();
        if let Some(positions) = entry.exp1_positions.as_ref().filter(|_| entry.experiment.is_object_array()) {
            for m in &merged {
                let hit = positions.iter().find(|&&(px, py)| {
                    PixelWindow::square(px, py, cfg.object_region).contains(m.x.round() as i64, m.y.round() as i64)
                });
                match hit {
                    Some(&(px, py)) => fixations.push((px as f64, py as f64)),
                    None => report.rejected_off_object += 1,
                }
            }
        } else {
            fixations.extend(merged.iter().map(|m| (m.x, m.y)));
        }
        report.rows_used += fixations.len();

        let oracle = entry.bbox.window();
        let (tx, ty) = (oracle.center_x, oracle.center_y);
        let oracle = PixelWindow::square(tx, ty, cfg.recognition_window);
        let found_at = fixations
            .iter()
            .position(|f| oracle.contains(f.0.round() as i64, f.1.round() as i64))
            .map(|i| i + 1);
        paths.push(Scanpath {
            trial_id,
            policy: format!("subject:{subject}"),
            seed: 0,
            fixations,
            found: found_at.is_some(),
            found_at,
            termination: if found_at.is_some() {
                Termination::Found
            } else {
                Termination::NotFound
            },
        });
    }
    report.rows_rejected = report.rejected_malformed
        + report.rejected_unknown_trial
        + report.rejected_outside_image
        + report.rejected_short
        + report.rejected_initial_center
        + report.rejected_off_object;
    Ok((paths, report))
}

fn reject(report: &mut IngestReport, line: u64, reason: &str) {
    log::warn!("fixation row {line}: {reason}");
    report.rejected_rows.push(RejectedRow {
        line,
        reason: reason.to_string(),
    });
}

// ---- scanpath tables ----

#[derive(Debug, Serialize, Deserialize)]
struct ScanpathRow {
    trial_id: String,
    policy: String,
    seed: u64,
    fix_index: usize,
    x: f64,
    y: f64,
    found_here: u8,
}

/// CSV with one row per fixation: `trial_id,policy,seed,fix_index,x,y,found_here`.
pub fn scanpaths_to_csv(paths: &[Scanpath]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in paths {
        if p.fixations.is_empty() {
            log::warn!("trial {} policy {}: empty scanpath not written", p.trial_id, p.policy);
        }
        for (i, &(x, y)) in p.fixations.iter().enumerate() {
            w.serialize(ScanpathRow {
                trial_id: p.trial_id.clone(),
                policy: p.policy.clone(),
                seed: p.seed,
                fix_index: i + 1,
                x,
                y,
                found_here: u8::from(p.found_at == Some(i + 1)),
            })?;
        }
    }
    w.into_inner().map_err(|e| Error::io("flushing CSV", e.into_error()))
}

pub fn write_scanpaths(path: impl AsRef<Path>, paths: &[Scanpath]) -> Result<()> {
    write_atomic(path.as_ref(), &scanpaths_to_csv(paths)?)
}

/// Reads a scanpath CSV back; rows of one scanpath must be contiguous.
pub fn read_scanpaths(path: impl AsRef<Path>) -> Result<Vec<Scanpath>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out: Vec<Scanpath> = Vec::new();
    for row in rdr.deserialize::<ScanpathRow>() {
        let row = row?;
        let same = out
            .last()
            .is_some_and(|p| p.trial_id == row.trial_id && p.policy == row.policy && p.seed == row.seed);
        if !same {
            out.push(Scanpath {
                trial_id: row.trial_id.clone(),
                policy: row.policy.clone(),
                seed: row.seed,
                fixations: Vec::new(),
                found: false,
                found_at: None,
                termination: Termination::NotFound,
            });
        }
        let p = out.last_mut().expect("pushed above");
        if row.fix_index != p.fixations.len() + 1 {
            return Err(Error::Format(format!(
                "{}: trial {} policy {} seed {}: fixation {} out of sequence",
                path.display(),
                row.trial_id,
                row.policy,
                row.seed,
                row.fix_index
            )));
        }
        p.fixations.push((row.x, row.y));
        if row.found_here != 0 && p.found_at.is_none() {
            p.found = true;
            p.found_at = Some(row.fix_index);
            p.termination = Termination::Found;
        }
    }
    Ok(out)
}

/// CSV with columns `fix_index,cumulative,stderr`.
pub fn curve_to_csv(curve: &PerformanceCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fix_index", "cumulative", "stderr"])?;
    for (i, (c, s)) in curve.cumulative.iter().zip(&curve.stderr).enumerate() {
        w.write_record([(i + 1).to_string(), c.to_string(), s.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::io("flushing CSV", e.into_error()))
}

// ---- experiment runs ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policies: Vec<SearchPolicy>,
    pub seed: u64,
    pub backend: BackendSpec,
    pub out_dir: PathBuf,
    /// Overrides the fixation budget of every experiment.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub overrides: BTreeMap<Experiment, ExperimentConfig>,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub threads: usize,
}

impl RunConfig {
    pub fn experiment_config(&self, exp: Experiment) -> ExperimentConfig {
        let mut cfg = self
            .overrides
            .get(&exp)
            .cloned()
            .unwrap_or_else(|| ExperimentConfig::for_experiment(exp));
        if let Some(b) = self.budget {
            cfg.max_fixations = b;
        }
        cfg
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Seed of repetition `rep` of a policy on a trial.
pub fn derive_seed(base: u64, trial_id: &str, policy: &str, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(trial_id.as_bytes());
    h.update([0]);
    h.update(policy.as_bytes());
    h.update((rep as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub trial_id: String,
    pub policy: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: String,
    pub runs: usize,
    pub found: usize,
    /// Mean over the runs that found the target.
    pub mean_fixations: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub scanpaths: usize,
    /// Mean and SD of the finding fixation over found scanpaths.
    pub mean_fixations: Option<f64>,
    pub sd_fixations: Option<f64>,
    pub fraction_unfound: f64,
    pub per_trial: Vec<TrialSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub crate_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policies: Vec<PolicySummary>,
    pub skipped: Vec<SkippedTrial>,
    pub provenance: Provenance,
}

impl RunSummary {
    pub fn is_clean(&self) -> bool {
        self.skipped.is_empty()
    }
}

pub struct RunResults {
    pub scanpaths: Vec<Scanpath>,
    pub curves: Vec<PerformanceCurve>,
    pub summary: RunSummary,
}

struct Job<'a> {
    trial: &'a TrialEntry,
    policy: &'a SearchPolicy,
}

/// Runs every policy on every trial with the configured repetitions and
/// writes `scanpaths.csv`, `curve_<policy>.csv` and `summary.json` to the
/// output directory. Trials whose features are missing are skipped and
/// listed in the summary.
pub fn run_experiment(config: &RunConfig, manifest: &DatasetManifest) -> Result<RunResults> {
    if config.policies.is_empty() {
        return Err(Error::Empty("policies"));
    }
    if let BackendSpec::PrecomputedFile { dir } = &config.backend {
        let needs = config.policies.iter().any(SearchPolicy::needs_features);
        if needs && !dir.is_dir() {
            return Err(Error::Parameter(format!("feature directory {} does not exist", dir.display())));
        }
    }
    let backend = config.backend.build()?;
    let jobs: Vec<Job> = manifest
        .trials
        .iter()
        .flat_map(|t| config.policies.iter().map(move |p| Job { trial: t, policy: p }))
        .collect();

    let slots: Vec<Mutex<Option<std::result::Result<Vec<Scanpath>, String>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let threads = match config.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    let mut trial_cache: Mutex<HashMap<String, Trial>> = Mutex::new(HashMap::new());

    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_job(job, config, manifest, backend.as_ref(), &trial_cache);
                *slots[i].lock().expect("slot lock") = Some(outcome.map_err(|e| e.to_string()));
            });
        }
    });
    trial_cache.get_mut().expect("cache lock").clear();

    let mut scanpaths = Vec::new();
    let mut skipped = Vec::new();
    for (job, slot) in jobs.iter().zip(slots) {
        match slot.into_inner().expect("slot lock").expect("every job ran") {
            Ok(paths) => scanpaths.extend(paths),
            Err(reason) => {
                log::warn!("skipping trial {} for {}: {reason}", job.trial.id, job.policy.label());
                skipped.push(SkippedTrial {
                    trial_id: job.trial.id.clone(),
                    policy: job.policy.label(),
                    reason,
                });
            }
        }
    }
    scanpaths.sort_by(|a, b| (&a.trial_id, &a.policy, a.seed).cmp(&(&b.trial_id, &b.policy, b.seed)));
    skipped.sort_by(|a, b| (&a.trial_id, &a.policy).cmp(&(&b.trial_id, &b.policy)));

    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for policy in &config.policies {
        let label = policy.label();
        let mine: Vec<&Scanpath> = scanpaths.iter().filter(|p| p.policy == label).collect();
        if mine.is_empty() {
            continue;
        }
        let max_n = manifest
            .trials
            .iter()
            .map(|t| config.experiment_config(t.experiment).max_fixations)
            .max()
            .unwrap_or(1);
        let found: Vec<Option<usize>> = mine.iter().map(|p| p.found_at).collect();
        curves.push(PerformanceCurve::from_found_at(label.clone(), &found, max_n)?);
        summaries.push(summarize(&label, &mine));
    }

    let summary = RunSummary {
        policies: summaries,
        skipped,
        provenance: Provenance {
            config_hash: config.hash(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };

    let out = &config.out_dir;
    write_scanpaths(out.join("scanpaths.csv"), &scanpaths)?;
    for c in &curves {
        write_atomic(&out.join(format!("curve_{}.csv", c.label)), &curve_to_csv(c)?)?;
    }
    write_atomic(&out.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(RunResults {
        scanpaths,
        curves,
        summary,
    })
}

fn run_job(
    job: &Job,
    config: &RunConfig,
    manifest: &DatasetManifest,
    backend: &dyn FeatureBackend,
    cache: &Mutex<HashMap<String, Trial>>,
) -> Result<Vec<Scanpath>> {
    let cached = cache.lock().expect("cache lock").get(&job.trial.id).cloned();
    let trial = match cached {
        Some(t) => t,
        None => {
            let t = manifest.load_trial(job.trial)?;
            cache.lock().expect("cache lock").insert(job.trial.id.clone(), t.clone());
            t
        }
    };
    let cfg = config.experiment_config(trial.experiment);
    let label = job.policy.label();
    (0..job.policy.repetitions())
        .map(|rep| {
            let seed = derive_seed(config.seed, &trial.id, &label, rep);
            run_trial(&trial, job.policy, &cfg, backend, seed)
        })
        .collect()
}

/// Summary of one policy's scanpaths, listed in output order.
pub fn summarize(label: &str, paths: &[&Scanpath]) -> PolicySummary {
    let found: Vec<f64> = paths.iter().filter_map(|p| p.found_at).map(|k| k as f64).collect();
    let stats = mean_sd(&found);
    let mut per_trial: Vec<TrialSummary> = Vec::new();
    for p in paths {
        if per_trial.last().map_or(true, |t| t.trial_id != p.trial_id) {
            per_trial.push(TrialSummary {
                trial_id: p.trial_id.clone(),
                runs: 0,
                found: 0,
                mean_fixations: None,
            });
        }
        let t = per_trial.last_mut().expect("pushed above");
        t.runs += 1;
        if let Some(k) = p.found_at {
            t.found += 1;
            let prev = t.mean_fixations.unwrap_or(0.0) * (t.found - 1) as f64;
            t.mean_fixations = Some((prev + k as f64) / t.found as f64);
        }
    }
    PolicySummary {
        policy: label.to_string(),
        scanpaths: paths.len(),
        mean_fixations: stats.map(|s| s.0),
        sd_fixations: stats.map(|s| s.1),
        fraction_unfound: 1.0 - found.len() as f64 / paths.len() as f64,
        per_trial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_window_centre() {
        let b = BBox { x: 10, y: 20, w: 40, h: 30 };
        let w = b.window();
        assert_eq!((w.center_x, w.center_y), (30, 35));
        assert_eq!(w.bounds(), (10, 50, 20, 50));
    }

    #[test]
    fn seeds_differ_by_trial_and_repetition() {
        let a = derive_seed(1, "t1", "chance", 0);
        assert_eq!(a, derive_seed(1, "t1", "chance", 0));
        assert_ne!(a, derive_seed(1, "t1", "chance", 1));
        assert_ne!(a, derive_seed(1, "t2", "chance", 0));
        assert_ne!(a, derive_seed(2, "t1", "chance", 0));
    }

    #[test]
    fn scanpath_csv_round_trip() {
        let p = Scanpath {
            trial_id: "a".into(),
            policy: "ivsn".into(),
            seed: 3,
            fixations: vec![(1.0, 2.0), (3.5, 4.0)],
            found: true,
            found_at: Some(2),
            termination: Termination::Found,
        };
        let bytes = scanpaths_to_csv(&[p.clone()]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("trial_id,policy,seed,fix_index,x,y,found_here\n"));
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("s.csv");
        write_scanpaths(&f, &[p.clone()]).unwrap();
        assert_eq!(read_scanpaths(&f).unwrap(), vec![p]);
    }

    #[test]
    fn manifest_rejects_duplicates() {
        let e = TrialEntry {
            id: "x".into(),
            experiment: Experiment::Exp2,
            target_image_path: "t.png".into(),
            search_image_path: "s.png".into(),
            bbox: BBox { x: 0, y: 0, w: 4, h: 4 },
            exp1_positions: None,
            target_id: None,
            search_id: None,
        };
        assert!(DatasetManifest::new(vec![e.clone(), e.clone()]).is_err());
        let mut arr = e;
        arr.experiment = Experiment::Exp1;
        assert!(DatasetManifest::new(vec![arr]).is_err());
    }

    #[test]
    fn summary_means() {
        let mk = |t: &str, k: Option<usize>| Scanpath {
            trial_id: t.into(),
            policy: "chance".into(),
            seed: 0,
            fixations: vec![(0.0, 0.0); k.unwrap_or(3)],
            found: k.is_some(),
            found_at: k,
            termination: Termination::Budget,
        };
        let paths = [mk("a", Some(1)), mk("a", Some(3)), mk("b", None), mk("b", Some(4))];
        let refs: Vec<&Scanpath> = paths.iter().collect();
        let s = summarize("chance", &refs);
        assert_eq!(s.mean_fixations, Some(8.0 / 3.0));
        assert_eq!(s.fraction_unfound, 0.25);
        assert_eq!(s.per_trial[0].mean_fixations, Some(2.0));
        assert_eq!(s.per_trial[1].found, 1);
    }
}
