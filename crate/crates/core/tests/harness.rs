use std::fs;
use std::path::Path;
use std::process::Command;

use ivsn::backend::{BackendSpec, ConvStage, RandomConvConfig};
use ivsn::harness::{
    ingest_from_reader, read_scanpaths, run_experiment, BBox, DatasetManifest, RunConfig, TrialEntry,
};
use ivsn::render::{render_curves, render_scanpath};
use ivsn::metrics::PerformanceCurve;
use ivsn::search::{array_positions, Experiment};

fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    image::GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)])).save(path).unwrap();
}

/// Two natural-scene trials with a bright square target.
fn scene_dataset(dir: &Path) -> DatasetManifest {
    write_png(&dir.join("target.png"), 32, 32, |x, y| if (x / 8 + y / 8) % 2 == 0 { 230 } else { 40 });
    for (i, (tx, ty)) in [(60u32, 200u32), (300, 40)].iter().enumerate() {
        write_png(&dir.join(format!("scene{i}.png")), 400, 300, |x, y| {
            if x >= *tx && x < tx + 32 && y >= *ty && y < ty + 32 {
                if ((x - tx) / 8 + (y - ty) / 8) % 2 == 0 { 230 } else { 40 }
            } else {
                ((x * 7 + y * 13) % 50) as u8 + 60
            }
        });
    }
    let trials = (0..2)
        .map(|i| {
            let (tx, ty) = [(60, 200), (300, 40)][i];
            TrialEntry {
                id: format!("scene{i}"),
                experiment: Experiment::Exp3,
                target_image_path: "target.png".into(),
                search_image_path: format!("scene{i}.png").into(),
                bbox: BBox { x: tx, y: ty, w: 32, h: 32 },
                exp1_positions: None,
                target_id: None,
                search_id: None,
            }
        })
        .collect();
    let m = DatasetManifest::new(trials).unwrap();
    m.save(dir.join("manifest.json")).unwrap();
    DatasetManifest::load(dir.join("manifest.json")).unwrap()
}

fn small_backend(seed: u64) -> BackendSpec {
    BackendSpec::RandomConv(RandomConvConfig {
        weight_seed: seed,
        weight_mean: 0.0,
        weight_sd: 1000.0,
        stages: vec![ConvStage::new(4, 3, 2, 2), ConvStage::new(8, 3, 1, 2)],
    })
}

fn config(out: &Path, policies: &[&str], threads: usize) -> RunConfig {
    RunConfig {
        policies: policies.iter().map(|p| p.parse().unwrap()).collect(),
        seed: 42,
        backend: small_backend(1),
        out_dir: out.to_path_buf(),
        budget: Some(12),
        overrides: Default::default(),
        threads,
    }
}

#[test]
fn two_trials_two_policies_give_four_scanpaths() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene_dataset(dir.path());
    let out = dir.path().join("out");
    let r = run_experiment(&config(&out, &["ivsn", "template_matching"], 1), &manifest).unwrap();
    assert_eq!(r.scanpaths.len(), 4);
    assert!(r.summary.is_clean());
    for f in ["scanpaths.csv", "summary.json", "curve_ivsn.csv", "curve_template_matching.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let curve = fs::read_to_string(out.join("curve_ivsn.csv")).unwrap();
    assert!(curve.starts_with("fix_index,cumulative,stderr\n"));
    // the checkerboard is an exact copy of the target
    let tm: Vec<_> = r.scanpaths.iter().filter(|p| p.policy == "template_matching").collect();
    assert!(tm.iter().all(|p| p.found_at == Some(1)));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene_dataset(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&config(&a, &["ivsn", "chance"], 1), &manifest).unwrap();
    run_experiment(&config(&b, &["ivsn", "chance"], 3), &manifest).unwrap();
    let read = |d: &Path| fs::read(d.join("scanpaths.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn chance_summary_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene_dataset(dir.path());
    let out = dir.path().join("out");
    let r = run_experiment(&config(&out, &["chance"], 0), &manifest).unwrap();
    let s = &r.summary.policies[0];
    assert_eq!(s.scanpaths, 200);
    assert_eq!(s.per_trial.len(), 2);
    assert!(s.per_trial.iter().all(|t| t.runs == 100));

    let paths = read_scanpaths(out.join("scanpaths.csv")).unwrap();
    let found: Vec<f64> = paths.iter().filter_map(|p| p.found_at).map(|k| k as f64).collect();
    let mean = found.iter().sum::<f64>() / found.len() as f64;
    assert_eq!(Some(mean), s.mean_fixations);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["policies"][0]["mean_fixations"].as_f64(), Some(mean));
    assert_eq!(json["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_features_skip_trials() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene_dataset(dir.path());
    let features = dir.path().join("features");
    fs::create_dir(&features).unwrap();
    let mut cfg = config(&dir.path().join("out"), &["ivsn", "chance"], 1);
    cfg.backend = BackendSpec::PrecomputedFile { dir: features };
    let r = run_experiment(&cfg, &manifest).unwrap();
    assert!(!r.summary.is_clean());
    assert_eq!(r.summary.skipped.len(), 2);
    assert!(r.summary.skipped.iter().all(|s| s.policy == "ivsn"));
    assert_eq!(r.scanpaths.len(), 200);
}

fn array_manifest(dir: &Path) -> DatasetManifest {
    write_png(&dir.join("array.png"), 1280, 1024, |_, _| 128);
    write_png(&dir.join("obj.png"), 156, 156, |_, _| 128);
    let positions = array_positions(1280, 1024, 32.0);
    let (tx, ty) = positions[2];
    DatasetManifest::new(vec![
        TrialEntry {
            id: "arr".into(),
            experiment: Experiment::Exp1,
            target_image_path: dir.join("obj.png"),
            search_image_path: dir.join("array.png"),
            bbox: BBox { x: tx - 78, y: ty - 78, w: 156, h: 156 },
            exp1_positions: Some(positions),
            target_id: None,
            search_id: None,
        },
        TrialEntry {
            id: "scene".into(),
            experiment: Experiment::Exp2,
            target_image_path: dir.join("obj.png"),
            search_image_path: dir.join("array.png"),
            bbox: BBox { x: 900, y: 100, w: 40, h: 40 },
            exp1_positions: None,
            target_id: None,
            search_id: None,
        },
    ])
    .unwrap()
}

const HEADER: &str = "trial_id,subject_id,fixation_index,x,y,onset_ms,duration_ms\n";

#[test]
fn consecutive_close_fixations_merge() {
    let dir = tempfile::tempdir().unwrap();
    let m = array_manifest(dir.path());
    let csv = format!("{HEADER}scene,s1,1,100,100,0,60\nscene,s1,2,110,100,60,60\n");
    let (paths, report) = ingest_from_reader(csv.as_bytes(), &m, &Default::default()).unwrap();
    assert_eq!(paths[0].fixations, vec![(105.0, 100.0)]);
    assert_eq!(report.rows_merged_away, 1);
    assert_eq!(report.rows_in, report.rows_used + report.rows_rejected + report.rows_merged_away);
}

#[test]
fn found_index_keeps_later_fixations() {
    let dir = tempfile::tempdir().unwrap();
    let m = array_manifest(dir.path());
    let csv = format!(
        "{HEADER}scene,s1,1,100,100,0,200\nscene,s1,2,400,600,200,200\nscene,s1,3,920,120,400,200\nscene,s1,4,200,900,600,200\n"
    );
    let (paths, _) = ingest_from_reader(csv.as_bytes(), &m, &Default::default()).unwrap();
    assert_eq!(paths[0].found_at, Some(3));
    assert_eq!(paths[0].len(), 4);
    assert_eq!(paths[0].policy, "subject:s1");
}

#[test]
fn array_fixations_off_objects_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let m = array_manifest(dir.path());
    let p = array_positions(1280, 1024, 32.0);
    let rows = [
        (640, 512),           // starting centre fixation
        (p[0].0, p[0].1 + 10), // object 0
        (640, 300),           // between objects
        (p[2].0 - 30, p[2].1), // target object
    ];
    let mut csv = HEADER.to_string();
    for (i, (x, y)) in rows.iter().enumerate() {
        csv += &format!("arr,s9,{},{x},{y},{},150\n", i + 1, i * 150);
    }
    csv += "arr,s9,x,1,1,0,1\nnope,s9,1,1,1,0,100\n";
    let (paths, report) = ingest_from_reader(csv.as_bytes(), &m, &Default::default()).unwrap();
    let path = &paths[0];
    assert_eq!(path.fixations, vec![(p[0].0 as f64, p[0].1 as f64), (p[2].0 as f64, p[2].1 as f64)]);
    assert_eq!(path.found_at, Some(2));
    assert_eq!(report.rejected_initial_center, 1);
    assert_eq!(report.rejected_off_object, 1);
    assert_eq!(report.rejected_malformed, 1);
    assert_eq!(report.rejected_unknown_trial, 1);
    assert_eq!(report.rejected_rows.iter().map(|r| r.line).collect::<Vec<_>>(), vec![6, 7]);
    assert_eq!(report.rows_in, 6);
    assert_eq!(report.rows_in, report.rows_used + report.rows_rejected + report.rows_merged_away);
}

#[test]
fn short_fixations_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let m = array_manifest(dir.path());
    let csv = format!("{HEADER}scene,s1,1,100,100,0,30\nscene,s1,2,400,100,30,80\n");
    let (paths, report) = ingest_from_reader(csv.as_bytes(), &m, &Default::default()).unwrap();
    assert_eq!(paths[0].fixations, vec![(400.0, 100.0)]);
    assert_eq!(report.rejected_short, 1);
}

#[test]
fn overlay_matches_search_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene_dataset(dir.path());
    let out = dir.path().join("out");
    let r = run_experiment(&config(&out, &["ivsn"], 1), &manifest).unwrap();
    let trial = manifest.load_trial(&manifest.trials[0]).unwrap();
    let png = dir.path().join("overlay.png");
    let layout = render_scanpath(&trial.search, &trial.target_bbox, &r.scanpaths[0], None, &png).unwrap();
    assert_eq!(image::image_dimensions(&png).unwrap(), (400, 300));
    assert_eq!(layout.markers.len(), r.scanpaths[0].len());
}

#[test]
fn curve_plot_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let staircase: Vec<f64> = (1..=6).map(|k| k as f64 / 6.0).collect();
    let c = PerformanceCurve::from_found_at("chance", &(1..=6).map(Some).collect::<Vec<_>>(), 6).unwrap();
    let png = dir.path().join("curves.png");
    let layout = render_curves(&[c], Some(&staircase), &png).unwrap();
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (layout.width, layout.height));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ivsn")).args(args).output().unwrap()
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    scene_dataset(dir.path());
    let d = |p: &str| dir.path().join(p).display().to_string();

    let run = cli(&[
        "run", "--manifest", &d("manifest.json"), "--policies", "ivsn,sliding_window",
        "--random-conv", "3", "--out", &d("run"), "--seed", "1", "--budget", "20",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let metrics = cli(&["metrics", "--scanpaths", &d("run/scanpaths.csv"), "--mode", "curve", "--out", &d("m")]);
    assert!(metrics.status.success(), "{}", String::from_utf8_lossy(&metrics.stderr));
    assert!(dir.path().join("m/curve_ivsn.csv").is_file());
    assert!(dir.path().join("m/curves.png").is_file());

    let sim = cli(&["metrics", "--scanpaths", &d("run/scanpaths.csv"), "--mode", "similarity", "--out", &d("m")]);
    assert!(sim.status.success());
    let table = fs::read_to_string(dir.path().join("m/similarity.csv")).unwrap();
    assert!(table.starts_with(",ivsn,sliding_window\n"));

    let fix = dir.path().join("fix.csv");
    fs::write(&fix, format!("{HEADER}scene0,a,1,50,50,0,100\nscene0,a,2,70,210,100,100\nghost,a,1,5,5,0,100\n")).unwrap();
    let ingest = cli(&["ingest", "--fixations", &d("fix.csv"), "--manifest", &d("manifest.json"), "--out", &d("human")]);
    assert_eq!(ingest.status.code(), Some(2), "unknown trial rows make the run unclean");
    let human = read_scanpaths(dir.path().join("human/scanpaths.csv")).unwrap();
    assert_eq!(human[0].found_at, Some(2));

    let render = cli(&[
        "render", "--trial", "scene0", "--scanpath", &d("run/scanpaths.csv"),
        "--manifest", &d("manifest.json"), "--out", &d("scene0.png"),
    ]);
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    assert_eq!(image::image_dimensions(dir.path().join("scene0.png")).unwrap(), (400, 300));

    let bad = cli(&["run", "--manifest", &d("manifest.json"), "--policies", "ivsn", "--out", &d("x")]);
    assert!(!bad.status.success());
}
