//! Plants the target's features in an empty search map and checks that the
//! first fixation lands on it.

use ivsn::backend::{GrayImage, InMemoryBackend, LayerId};
use ivsn::search::{run_trial, Experiment, ExperimentConfig, SearchPolicy, Trial};
use ivsn::tensor::{FeatureMap, PixelWindow, Scale};

fn main() -> ivsn::Result<()> {
    let cell = 16;
    let kernel = FeatureMap::new(3, 2, 3, (0..18).map(|i| (i as f64 * 0.37).sin()).collect(), Scale::ONE)?;
    let mut search = FeatureMap::zeros(3, 14, 14, Scale::integer(cell as u32)?)?;
    let (r0, c0) = (9, 4);
    for ch in 0..3 {
        for r in 0..2 {
            for c in 0..3 {
                search.set(ch, r0 + r, c0 + c, kernel.get(ch, r, c));
            }
        }
    }

    let mut backend = InMemoryBackend::new();
    backend.insert("target", LayerId::TOP, kernel);
    backend.insert("search", LayerId::BELOW_TOP, search);

    let bbox = PixelWindow::new((c0 * cell + 3 * cell / 2) as i64, (r0 * cell + cell) as i64, 48, 32);
    let trial = Trial::new(
        "planted",
        Experiment::Exp2,
        GrayImage::filled("target", 48, 32, 0.0)?,
        GrayImage::filled("search", 224, 224, 0.0)?,
        bbox,
        vec![],
    )?;
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp2);
    cfg.recognition_window = 45;

    let path = run_trial(&trial, &SearchPolicy::ivsn(), &cfg, &backend, 0)?;
    println!("fixations: {:?}", path.fixations);
    println!("found at {:?} ({:?})", path.found_at, path.termination);
    Ok(())
}
