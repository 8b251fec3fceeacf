//! Runs the feature-free baselines on a synthetic scene: chance, sliding
//! window, template matching and bottom-up saliency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivsn::backend::{GrayImage, InMemoryBackend};
use ivsn::search::{run_trial, Experiment, ExperimentConfig, SearchPolicy, Trial, CHANCE_REPETITIONS};
use ivsn::tensor::PixelWindow;

fn scene() -> ivsn::Result<Trial> {
    let (w, h) = (320, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pixels: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.3..0.5)).collect();
    let (tx, ty) = (230, 170);
    let mut target = Vec::new();
    for y in 0..28 {
        for x in 0..28 {
            let v = if (x / 7 + y / 7) % 2 == 0 { 1.0 } else { 0.0 };
            pixels[(ty + y) * w + tx + x] = v;
            target.push(v);
        }
    }
    Trial::new(
        "checker",
        Experiment::Exp2,
        GrayImage::new("checker_target", 28, 28, target)?,
        GrayImage::new("checker_search", w, h, pixels)?,
        PixelWindow::new((tx + 14) as i64, (ty + 14) as i64, 28, 28),
        vec![],
    )
}

fn main() -> ivsn::Result<()> {
    let trial = scene()?;
    let cfg = ExperimentConfig::for_experiment(Experiment::Exp2);
    let none = InMemoryBackend::new();

    let policies = [
        SearchPolicy::SlidingWindow { stride: 28 },
        SearchPolicy::TemplateMatching { template_size: 28 },
        SearchPolicy::IttiKoch,
    ];
    for p in &policies {
        let path = run_trial(&trial, p, &cfg, &none, 0)?;
        println!("{:<18} found at {:?}", p.label(), path.found_at);
    }

    let found: Vec<usize> = (0..CHANCE_REPETITIONS as u64)
        .filter_map(|seed| run_trial(&trial, &SearchPolicy::Chance, &cfg, &none, seed).ok())
        .filter_map(|p| p.found_at)
        .collect();
    let mean = found.iter().sum::<usize>() as f64 / found.len().max(1) as f64;
    println!(
        "{:<18} found in {}/{} runs, mean {mean:.1} fixations",
        "chance",
        found.len(),
        CHANCE_REPETITIONS
    );
    Ok(())
}
