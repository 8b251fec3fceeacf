//! Builds a one-trial dataset on disk, ingests a human fixation table and
//! draws the resulting scanpath.

use std::io::Write;

use ivsn::backend::GrayImage;
use ivsn::harness::{ingest_human_fixations, write_scanpaths, BBox, DatasetManifest, TrialEntry};
use ivsn::render::render_scanpath;
use ivsn::search::Experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("ivsn_ingest_example");
    std::fs::create_dir_all(&dir)?;

    let (w, h) = (640, 480);
    let pixels: Vec<f64> = (0..w * h).map(|i| 0.4 + 0.2 * (((i % w) / 40 + (i / w) / 40) % 2) as f64).collect();
    let search = GrayImage::new("scene", w, h, pixels)?;
    let target = search.crop("cup", 480, 300, 64, 64)?;
    search.to_luma8().save(dir.join("scene.png"))?;
    target.to_luma8().save(dir.join("cup.png"))?;

    let manifest = DatasetManifest::new(vec![TrialEntry {
        id: "t1".into(),
        experiment: Experiment::Exp3,
        target_image_path: dir.join("cup.png"),
        search_image_path: dir.join("scene.png"),
        bbox: BBox { x: 480, y: 300, w: 64, h: 64 },
        exp1_positions: None,
        target_id: None,
        search_id: None,
    }])?;
    manifest.save(dir.join("manifest.json"))?;

    let csv = dir.join("fixations.csv");
    let mut f = std::fs::File::create(&csv)?;
    let rows = [
        "trial_id,subject_id,fixation_index,x,y,onset_ms,duration_ms",
        "t1,s1,1,320,240,0,200",
        "t1,s1,2,150,120,230,180",
        "t1,s1,3,160,125,420,90",
        "t1,s1,4,400,100,540,30",
        "t1,s1,5,300,350,600,210",
        "t1,s1,6,505,330,840,260",
        "t1,s2,1,322,238,0,150",
        "t1,s2,2,520,320,180,300",
        "t9,s1,1,10,10,0,100",
    ];
    for r in rows {
        writeln!(f, "{r}")?;
    }
    drop(f);

    let (paths, report) = ingest_human_fixations(&csv, &manifest, &Default::default())?;
    println!(
        "rows in {}, used {}, rejected {}, merged away {}",
        report.rows_in, report.rows_used, report.rows_rejected, report.rows_merged_away
    );
    for p in &paths {
        println!("{} {}: {:?} found at {:?}", p.trial_id, p.policy, p.fixations, p.found_at);
    }
    write_scanpaths(dir.join("human.csv"), &paths)?;

    let trial = manifest.load_trial(&manifest.trials[0])?;
    let out = dir.join("s1.png");
    let layout = render_scanpath(&trial.search, &trial.target_bbox, &paths[0], None, &out)?;
    println!("{} markers drawn to {}", layout.markers.len(), out.display());
    Ok(())
}
