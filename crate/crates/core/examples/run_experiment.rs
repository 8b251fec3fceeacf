//! Generates a small Exp2-style dataset and runs several policies over it
//! with the random-weight backend, writing scanpaths, curves and a summary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivsn::backend::{BackendSpec, ConvStage, GrayImage, RandomConvConfig};
use ivsn::harness::{run_experiment, BBox, DatasetManifest, RunConfig, TrialEntry};
use ivsn::render::render_curves;
use ivsn::search::Experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("ivsn_run_example");
    std::fs::create_dir_all(&dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (w, h, side) = (448, 448, 56);
    let mut entries = Vec::new();
    for i in 0..6 {
        let pixels: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..0.6)).collect();
        let mut search = GrayImage::new(format!("search{i}"), w, h, pixels)?;
        let (x0, y0) = (rng.gen_range(0..w - side), rng.gen_range(0..h - side));
        for y in 0..side {
            for x in 0..side {
                search.set(x0 + x, y0 + y, if (x / 8 + y / 8) % 2 == 0 { 1.0 } else { 0.0 });
            }
        }
        let target = search.crop(format!("target{i}"), x0, y0, side, side)?;
        let (sp, tp) = (dir.join(format!("search{i}.png")), dir.join(format!("target{i}.png")));
        search.to_luma8().save(&sp)?;
        target.to_luma8().save(&tp)?;
        entries.push(TrialEntry {
            id: format!("trial{i}"),
            experiment: Experiment::Exp2,
            target_image_path: tp,
            search_image_path: sp,
            bbox: BBox {
                x: x0 as i64,
                y: y0 as i64,
                w: side as u32,
                h: side as u32,
            },
            exp1_positions: None,
            target_id: None,
            search_id: None,
        });
    }
    let manifest = DatasetManifest::new(entries)?;

    let config = RunConfig {
        policies: ["ivsn", "template_matching", "itti_koch", "chance"]
            .iter()
            .map(|s| s.parse())
            .collect::<ivsn::Result<_>>()?,
        seed: 7,
        backend: BackendSpec::RandomConv(RandomConvConfig {
            weight_seed: 2,
            weight_mean: 0.0,
            weight_sd: 1000.0,
            stages: vec![ConvStage::new(8, 3, 2, 2), ConvStage::new(16, 3, 1, 2), ConvStage::new(32, 3, 1, 2)],
        }),
        out_dir: dir.join("out"),
        budget: Some(30),
        overrides: Default::default(),
        threads: 0,
    };
    let results = run_experiment(&config, &manifest)?;
    for p in &results.summary.policies {
        println!(
            "{:<18} {:>4} scanpaths, mean fixations {:?}, unfound {:.2}",
            p.policy, p.scanpaths, p.mean_fixations, p.fraction_unfound
        );
    }
    render_curves(&results.curves, None, dir.join("out").join("curves.png"))?;
    println!("outputs in {}", dir.join("out").display());
    Ok(())
}
