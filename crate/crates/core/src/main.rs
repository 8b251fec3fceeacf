use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ivsn::backend::{BackendSpec, RandomConvConfig};
use ivsn::harness::{
    curve_to_csv, ingest_human_fixations, read_scanpaths, run_experiment, write_atomic,
    write_scanpaths, DatasetManifest, RunConfig,
};
use ivsn::metrics::{correlation_matrix, similarity_matrix, LabeledMatrix, PerformanceCurve};
use ivsn::render::{render_curves, render_scanpath};
use ivsn::search::{Experiment, ExperimentConfig, SearchPolicy};
use ivsn::{Error, Result};

#[derive(Parser)]
#[command(name = "ivsn", version, about = "Target-modulated visual search and scanpath metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Curve,
    Similarity,
    Correlation,
}

#[derive(Subcommand)]
enum Command {
    /// Run search policies over every trial of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated policy labels, e.g. ivsn,chance,ivsn_24_23.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        /// Directory of exported IVSNT1 feature files.
        #[arg(long, conflicts_with = "random_conv")]
        features_dir: Option<PathBuf>,
        /// Use the random-weight network with this seed instead of files.
        #[arg(long)]
        random_conv: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixation budget for every experiment.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Performance curves, similarity or fixation-count correlation tables.
    Metrics {
        /// One or two scanpath CSV files.
        #[arg(long, num_args = 1..=2, required = true)]
        scanpaths: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Clustering bandwidth in pixels.
        #[arg(long, default_value_t = 45.0)]
        bandwidth: f64,
        /// Compare only the first N fixations.
        #[arg(long)]
        prefix: Option<usize>,
        /// Length of the performance curves; longest scanpath if unset.
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Convert a human fixation table into scanpaths.
    Ingest {
        #[arg(long)]
        fixations: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one scanpath over its search image.
    Render {
        #[arg(long)]
        trial: String,
        #[arg(long)]
        scanpath: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which policy's scanpath to draw; first one on the trial if unset.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether the run was fully clean.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            manifest,
            policies,
            features_dir,
            random_conv,
            out,
            seed,
            budget,
            threads,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let policies = policies
                .iter()
                .map(|p| p.parse::<SearchPolicy>())
                .collect::<Result<Vec<_>>>()?;
            let backend = match (features_dir, random_conv) {
                (Some(dir), _) => BackendSpec::PrecomputedFile { dir },
                (None, Some(s)) => BackendSpec::RandomConv(RandomConvConfig::new(s)),
                (None, None) if policies.iter().any(SearchPolicy::needs_features) => {
                    return Err(Error::Parameter(
                        "feature-based policies need --features-dir or --random-conv".into(),
                    ))
                }
                (None, None) => BackendSpec::PrecomputedFile { dir: PathBuf::new() },
            };
            let config = RunConfig {
                policies,
                seed,
                backend,
                out_dir: out.clone(),
                budget,
                overrides: BTreeMap::new(),
                threads,
            };
            write_atomic(&out.join("config.json"), serde_json::to_string_pretty(&config)?.as_bytes())?;
            let results = run_experiment(&config, &manifest)?;
            for p in &results.summary.policies {
                println!(
                    "{}: {} scanpaths, mean fixations {}, unfound {:.3}",
                    p.policy,
                    p.scanpaths,
                    p.mean_fixations.map_or("n/a".into(), |m| format!("{m:.3}")),
                    p.fraction_unfound
                );
            }
            for s in &results.summary.skipped {
                eprintln!("skipped {} ({}): {}", s.trial_id, s.policy, s.reason);
            }
            Ok(results.summary.is_clean())
        }
        Command::Metrics {
            scanpaths,
            mode,
            out,
            bandwidth,
            prefix,
            max_n,
        } => {
            let a = read_scanpaths(&scanpaths[0])?;
            let b = match scanpaths.get(1) {
                Some(p) => read_scanpaths(p)?,
                None => a.clone(),
            };
            match mode {
                Mode::Curve => {
                    let all: Vec<_> = if scanpaths.len() > 1 {
                        a.iter().chain(&b).cloned().collect()
                    } else {
                        a
                    };
                    let n = max_n.unwrap_or_else(|| all.iter().map(|p| p.len()).max().unwrap_or(1));
                    let mut labels: Vec<&str> = all.iter().map(|p| p.policy.as_str()).collect();
                    labels.sort();
                    labels.dedup();
                    let mut curves = Vec::new();
                    for label in labels {
                        let found: Vec<_> = all.iter().filter(|p| p.policy == label).map(|p| p.found_at).collect();
                        let c = PerformanceCurve::from_found_at(label, &found, n)?;
                        let file = format!("curve_{}.csv", label.replace([':', '/'], "_"));
                        write_atomic(&out.join(file), &curve_to_csv(&c)?)?;
                        curves.push(c);
                    }
                    render_curves(&curves, None, out.join("curves.png"))?;
                    write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&curves)?.as_bytes())?;
                }
                Mode::Similarity => {
                    let m = similarity_matrix(&a, &b, bandwidth, prefix)?;
                    write_matrix(&out, "similarity", &m)?;
                }
                Mode::Correlation => {
                    let m = correlation_matrix(&a, &b)?;
                    write_matrix(&out, "correlation", &m)?;
                }
            }
            Ok(true)
        }
        Command::Ingest {
            fixations,
            manifest,
            out,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let overrides: BTreeMap<Experiment, ExperimentConfig> = BTreeMap::new();
            let (paths, report) = ingest_human_fixations(&fixations, &manifest, &overrides)?;
            write_scanpaths(out.join("scanpaths.csv"), &paths)?;
            write_atomic(&out.join("ingest_report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
            println!(
                "rows in {}, used {}, rejected {}, merged away {}",
                report.rows_in, report.rows_used, report.rows_rejected, report.rows_merged_away
            );
            Ok(report.rejected_malformed + report.rejected_unknown_trial + report.rejected_outside_image == 0)
        }
        Command::Render {
            trial,
            scanpath,
            manifest,
            out,
            policy,
            seed,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let entry = manifest
                .entry(&trial)
                .ok_or_else(|| Error::Parameter(format!("trial `{trial}` not in manifest")))?;
            let t = manifest.load_trial(entry)?;
            let paths = read_scanpaths(&scanpath)?;
            let chosen = paths
                .iter()
                .find(|p| {
                    p.trial_id == trial
                        && policy.as_ref().map_or(true, |q| &p.policy == q)
                        && seed.map_or(true, |s| p.seed == s)
                })
                .ok_or_else(|| Error::Parameter(format!("no matching scanpath for trial `{trial}`")))?;
            let layout = render_scanpath(&t.search, &t.target_bbox, chosen, None, &out)?;
            println!("{} markers on {}x{}", layout.markers.len(), layout.width, layout.height);
            Ok(true)
        }
    }
}

fn write_matrix(out: &std::path::Path, name: &str, m: &LabeledMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(m.cols.iter().cloned());
    w.write_record(&header)?;
    for (r, row) in m.rows.iter().zip(&m.values) {
        let mut rec = vec![r.clone()];
        rec.extend(row.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&out.join(format!("{name}.csv")), &bytes)?;
    write_atomic(&out.join(format!("{name}.json")), serde_json::to_string_pretty(m)?.as_bytes())
}
