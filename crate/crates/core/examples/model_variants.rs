//! Runs the network-driven models on one scene with a small random-weight
//! backend: the plain model, a lower layer pair, finite memory, the saccade
//! size prior and the recognition stop rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivsn::attention::{ModulationConfig, RecoveryCurve};
use ivsn::backend::{ConvStage, GrayImage, RandomConvBackend, RandomConvConfig};
use ivsn::search::{
    default_size_constraint, run_trial, Experiment, ExperimentConfig, SearchPolicy, Trial, RECOGNITION_THRESHOLD,
};
use ivsn::tensor::PixelWindow;

fn main() -> ivsn::Result<()> {
    let (w, h) = (448, 448);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pixels: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (tx, ty) = (300, 96);
    let target: Vec<f64> = (0..64 * 64).map(|i| pixels[(ty + i / 64) * w + tx + i % 64]).collect();
    let trial = Trial::new(
        "noise",
        Experiment::Exp3,
        GrayImage::new("noise_target", 64, 64, target)?,
        GrayImage::new("noise_search", w, h, pixels)?,
        PixelWindow::new((tx + 32) as i64, (ty + 32) as i64, 64, 64),
        vec![],
    )?;

    let backend = RandomConvBackend::new(RandomConvConfig {
        weight_seed: 1,
        weight_mean: 0.0,
        weight_sd: 1000.0,
        stages: vec![ConvStage::new(8, 3, 2, 2), ConvStage::new(16, 3, 1, 2), ConvStage::new(32, 3, 1, 2)],
    })?;
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
    cfg.max_fixations = 40;

    let policies = [
        SearchPolicy::ivsn(),
        SearchPolicy::Ivsn {
            layers: ModulationConfig::from_target_layer(24)?,
        },
        SearchPolicy::IvsnFiniteIor {
            curve: RecoveryCurve::Exponential { beta: 1.0, tau: 4.0 },
        },
        SearchPolicy::IvsnSize {
            constraint: default_size_constraint(),
        },
        SearchPolicy::IvsnRecognition {
            threshold: RECOGNITION_THRESHOLD,
        },
    ];
    for p in &policies {
        let path = run_trial(&trial, p, &cfg, &backend, 0)?;
        println!(
            "{:<17} {:>2} fixations, found at {:?}, {:?}",
            p.label(),
            path.len(),
            path.found_at,
            path.termination
        );
    }
    Ok(())
}
