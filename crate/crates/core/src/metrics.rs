//! Evaluation: cumulative performance, fixation-count consistency, scanpath
//! similarity, saccade sizes and distance-to-target statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::Scanpath;

/// Fraction of trials that found the target within the first n fixations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCurve {
    pub label: String,
    /// `counts[i]`: trials first finding the target at fixation `i + 1`.
    pub counts: Vec<usize>,
    pub cumulative: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_trials: usize,
}

impl PerformanceCurve {
    /// Builds a curve from first-found fixation numbers (1-based); `None` or
    /// values beyond `max_n` count as trials that never found the target.
    pub fn from_found_at(label: impl Into<String>, found_at: &[Option<usize>], max_n: usize) -> Result<Self> {
        if found_at.is_empty() {
            return Err(Error::Empty("scanpaths"));
        }
        let n = found_at.len();
        let mut counts = vec![0usize; max_n];
        for k in found_at.iter().flatten() {
            if (1..=max_n).contains(k) {
                counts[k - 1] += 1;
            }
        }
        let mut acc = 0;
        let mut cumulative = Vec::with_capacity(max_n);
        let mut stderr = Vec::with_capacity(max_n);
        for c in &counts {
            acc += c;
            let p = acc as f64 / n as f64;
            cumulative.push(p);
            stderr.push((p * (1.0 - p) / n as f64).sqrt());
        }
        Ok(PerformanceCurve {
            label: label.into(),
            counts,
            cumulative,
            stderr,
            n_trials: n,
        })
    }
}

pub fn cumulative_performance(scanpaths: &[Scanpath], max_n: usize) -> Result<PerformanceCurve> {
    let label = scanpaths.first().map(|s| s.policy.clone()).unwrap_or_default();
    let found: Vec<Option<usize>> = scanpaths.iter().map(|s| s.found_at).collect();
    PerformanceCurve::from_found_at(label, &found, max_n)
}

/// Mode-seeking clusters of fixation positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationClustering {
    pub centers: Vec<(f64, f64)>,
    pub bandwidth: f64,
}

impl FixationClustering {
    pub fn new(centers: Vec<(f64, f64)>, bandwidth: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty("cluster centers"));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(FixationClustering { centers, bandwidth })
    }

    /// Nearest center; ties go to the lower index.
    pub fn assign(&self, p: (f64, f64)) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = dist(*c, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn labels(&self, fixations: &[(f64, f64)]) -> Vec<usize> {
        fixations.iter().map(|&p| self.assign(p)).collect()
    }

    /// `max(0, 1 - d / (2 * bandwidth))` between two cluster centers.
    pub fn substitution(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        (1.0 - dist(self.centers[a], self.centers[b]) / (2.0 * self.bandwidth)).max(0.0)
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

const SHIFT_TOLERANCE: f64 = 0.1;
const MAX_SHIFT_ITERATIONS: usize = 1000;

/// Flat-kernel mean shift started from every fixation. Converged modes
/// closer than half the bandwidth to an earlier mode are merged into it.
pub fn meanshift_cluster(fixations: &[(f64, f64)], bandwidth: f64) -> Result<FixationClustering> {
    if fixations.is_empty() {
        return Err(Error::Empty("fixations"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut centers: Vec<(f64, f64)> = Vec::new();
    for &seed in fixations {
        let mut m = seed;
        for _ in 0..MAX_SHIFT_ITERATIONS {
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
            for &p in fixations {
                if dist(p, m) <= bandwidth {
                    sx += p.0;
                    sy += p.1;
                    n += 1;
                }
            }
            let next = (sx / n as f64, sy / n as f64);
            let shift = dist(next, m);
            m = next;
            if shift < SHIFT_TOLERANCE {
                break;
            }
        }
        if !centers.iter().any(|&c| dist(c, m) < bandwidth / 2.0) {
            centers.push(m);
        }
    }
    FixationClustering::new(centers, bandwidth)
}

/// Global alignment with zero gap cost: the best total substitution score
/// over order-preserving pairings of `a` and `b`.
pub fn needleman_wunsch(a: &[usize], b: &[usize], sub: impl Fn(usize, usize) -> f64) -> f64 {
    let m = b.len();
    let mut prev = vec![0.0; m + 1];
    let mut cur = vec![0.0; m + 1];
    for &x in a {
        for j in 1..=m {
            let diag = prev[j - 1] + sub(x, b[j - 1]);
            cur[j] = diag.max(prev[j]).max(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanpathSimilarity {
    pub score: f64,
    /// Length of the longer compared sequence.
    pub aligned_length: usize,
    pub labels_a: Vec<usize>,
    pub labels_b: Vec<usize>,
}

/// Similarity of two fixation sequences in `[0, 1]`: alignment score of
/// their cluster labels divided by the longer sequence's self-score.
pub fn sequence_score(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    clustering: &FixationClustering,
    prefix_len: Option<usize>,
) -> Result<ScanpathSimilarity> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("scanpath"));
    }
    let (a, b) = match prefix_len {
        Some(k) => {
            if k == 0 || a.len() < k || b.len() < k {
                return Err(Error::Parameter(format!(
                    "prefix of {k} fixations needs both scanpaths at least that long ({} and {})",
                    a.len(),
                    b.len()
                )));
            }
            (&a[..k], &b[..k])
        }
        None => (a, b),
    };
    let labels_a = clustering.labels(a);
    let labels_b = clustering.labels(b);
    let longer = labels_a.len().max(labels_b.len());
    let raw = needleman_wunsch(&labels_a, &labels_b, |x, y| clustering.substitution(x, y));
    Ok(ScanpathSimilarity {
        score: (raw / longer as f64).clamp(0.0, 1.0),
        aligned_length: longer,
        labels_a,
        labels_b,
    })
}

pub fn scanpath_score(
    a: &Scanpath,
    b: &Scanpath,
    clustering: &FixationClustering,
    prefix_len: Option<usize>,
) -> Result<ScanpathSimilarity> {
    sequence_score(&a.fixations, &b.fixations, clustering, prefix_len)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("zero variance in fixation counts"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of fixation counts over trials both sides found.
pub fn fixation_count_correlation(pairs: &[(Option<usize>, Option<usize>)]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .filter_map(|p| match p {
            (Some(a), Some(b)) => Some((*a as f64, *b as f64)),
            _ => None,
        })
        .unzip();
    pearson(&x, &y)
}

/// Mean distance between two independent uniform points in an `lw` x `lh`
/// rectangle, in the rectangle's units.
pub fn expected_random_distance(lw: f64, lh: f64) -> f64 {
    let d = lw.hypot(lh);
    let (w2, h2) = (lw * lw, lh * lh);
    (lw.powi(3) / h2
        + lh.powi(3) / w2
        + d * (3.0 - w2 / h2 - h2 / w2)
        + 2.5 * (h2 / lw * ((lw + d) / lh).ln() + w2 / lh * ((lh + d) / lw).ln()))
        / 15.0
}

/// Euclidean distances between consecutive fixations, in degrees.
pub fn saccade_sizes(fixations: &[(f64, f64)], pixels_per_degree: f64) -> Vec<f64> {
    fixations
        .windows(2)
        .map(|w| dist(w[0], w[1]) / pixels_per_degree)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaccadeStats {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub bin_width: f64,
    /// Counts of sizes in `[i * bin_width, (i + 1) * bin_width)`.
    pub histogram: Vec<usize>,
}

pub fn saccade_size_stats(scanpaths: &[Scanpath], pixels_per_degree: f64, bin_width: f64) -> Result<SaccadeStats> {
    if !(bin_width > 0.0) || !(pixels_per_degree > 0.0) {
        return Err(Error::Parameter("bin width and pixels per degree must be positive".into()));
    }
    let sizes: Vec<f64> = scanpaths
        .iter()
        .flat_map(|s| saccade_sizes(&s.fixations, pixels_per_degree))
        .collect();
    if sizes.is_empty() {
        return Err(Error::Empty("saccades"));
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / n;
    let sd = if sizes.len() > 1 {
        (sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let bins = (sizes.iter().cloned().fold(0.0, f64::max) / bin_width).floor() as usize + 1;
    let mut histogram = vec![0; bins];
    for s in &sizes {
        histogram[((s / bin_width).floor() as usize).min(bins - 1)] += 1;
    }
    Ok(SaccadeStats {
        count: sizes.len(),
        mean,
        sd,
        bin_width,
        histogram,
    })
}

/// Distances (degrees) from fixations to the target centre, by offset from
/// the finding fixation: `profile[0]` holds the last fixation (L-0),
/// `profile[1]` the one before it, and so on. Unfound scanpaths are skipped;
/// fixations after the finding one are ignored.
pub fn distance_to_target_profile(
    scanpaths: &[(&Scanpath, (f64, f64))],
    pixels_per_degree: f64,
    last_k: usize,
) -> Vec<Vec<f64>> {
    let mut profile = vec![Vec::new(); last_k];
    for (path, target) in scanpaths {
        let Some(k) = path.found_at else { continue };
        let used = &path.fixations[..k.min(path.fixations.len())];
        for (offset, f) in used.iter().rev().take(last_k).enumerate() {
            profile[offset].push(dist(*f, *target) / pixels_per_degree);
        }
    }
    profile
}

/// Probability that fixation n lands within `radius_deg` of fixation
/// n - lag, for lags 1..=max_lag (index 0 = lag 1). Lags with no pairs
/// report 0.
pub fn revisit_probabilities(
    scanpaths: &[Scanpath],
    pixels_per_degree: f64,
    radius_deg: f64,
    max_lag: usize,
) -> Vec<f64> {
    let radius = radius_deg * pixels_per_degree;
    (1..=max_lag)
        .map(|lag| {
            let (mut hits, mut total) = (0usize, 0usize);
            for s in scanpaths {
                for n in lag..s.fixations.len() {
                    total += 1;
                    if dist(s.fixations[n], s.fixations[n - lag]) <= radius {
                        hits += 1;
                    }
                }
            }
            if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            }
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

/// Group-by-group table of a pairwise statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

fn groups(paths: &[Scanpath]) -> Vec<String> {
    let mut g: Vec<String> = paths.iter().map(|p| p.policy.clone()).collect();
    g.sort();
    g.dedup();
    g
}

/// Mean scanpath similarity between every group (policy or subject) of `a`
/// and every group of `b`, over pairs on the same trial. Each trial is
/// clustered on its recorded human fixations (`subject:` groups of `a`),
/// or on all of `a` when there are none. A scanpath is never paired with
/// itself.
pub fn similarity_matrix(
    a: &[Scanpath],
    b: &[Scanpath],
    bandwidth: f64,
    prefix_len: Option<usize>,
) -> Result<LabeledMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("scanpaths"));
    }
    let (rows, cols) = (groups(a), groups(b));
    let mut sums = vec![vec![(0.0, 0usize); cols.len()]; rows.len()];
    let mut trials: Vec<&str> = a.iter().map(|p| p.trial_id.as_str()).collect();
    trials.sort();
    trials.dedup();
    for trial in trials {
        let here_a: Vec<&Scanpath> = a.iter().filter(|p| p.trial_id == trial).collect();
        let here_b: Vec<&Scanpath> = b.iter().filter(|p| p.trial_id == trial).collect();
        if here_b.is_empty() {
            continue;
        }
        let human: Vec<(f64, f64)> = here_a
            .iter()
            .filter(|p| p.policy.starts_with("subject:"))
            .flat_map(|p| p.fixations.iter().copied())
            .collect();
        let pool = if human.is_empty() {
            here_a.iter().flat_map(|p| p.fixations.iter().copied()).collect()
        } else {
            human
        };
        if pool.is_empty() {
            continue;
        }
        let clustering = meanshift_cluster(&pool, bandwidth)?;
        for pa in &here_a {
            let r = rows.binary_search(&pa.policy).expect("row group");
            for pb in &here_b {
                if std::ptr::eq(*pa, *pb) || (pa.policy == pb.policy && pa.seed == pb.seed) {
                    continue;
                }
                let long_enough = prefix_len.map_or(true, |k| pa.len() >= k && pb.len() >= k);
                if pa.is_empty() || pb.is_empty() || !long_enough {
                    continue;
                }
                let c = cols.binary_search(&pb.policy).expect("column group");
                let s = scanpath_score(pa, pb, &clustering, prefix_len)?;
                sums[r][c].0 += s.score;
                sums[r][c].1 += 1;
            }
        }
    }
    let values = sums
        .into_iter()
        .map(|row| row.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect())
        .collect();
    Ok(LabeledMatrix { rows, cols, values })
}

fn mean_found_by_trial(paths: &[Scanpath], group: &str) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for p in paths.iter().filter(|p| p.policy == group) {
        if let Some(k) = p.found_at {
            let e = acc.entry(p.trial_id.clone()).or_default();
            e.0 += k as f64;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect()
}

/// Pearson correlation of per-trial fixation counts between every group of
/// `a` and every group of `b`, over trials both found. Undefined cells
/// (too few pairs, zero variance) are `None`.
pub fn correlation_matrix(a: &[Scanpath], b: &[Scanpath]) -> Result<LabeledMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("scanpaths"));
    }
    let (rows, cols) = (groups(a), groups(b));
    let values = rows
        .iter()
        .map(|r| {
            let ra = mean_found_by_trial(a, r);
            cols.iter()
                .map(|c| {
                    let cb = mean_found_by_trial(b, c);
                    let (x, y): (Vec<f64>, Vec<f64>) = ra
                        .iter()
                        .filter_map(|(t, v)| cb.get(t).map(|w| (*v, *w)))
                        .unzip();
                    pearson(&x, &y).ok()
                })
                .collect()
        })
        .collect();
    Ok(LabeledMatrix { rows, cols, values })
}
