use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivsn::attention::RecoveryCurve;
use ivsn::backend::{ConvStage, GrayImage, InMemoryBackend, RandomConvBackend, RandomConvConfig};
use ivsn::metrics::{
    distance_to_target_profile, expected_random_distance, fixation_count_correlation, meanshift_cluster,
    pearson, revisit_probabilities,
};
use ivsn::search::{
    array_positions, run_trial, run_with_attention, Experiment, ExperimentConfig, SearchPolicy, Termination, Trial,
};
use ivsn::tensor::{AttentionMap, PixelWindow};

/// Straightforward mean shift: every seed iterated to a fixed point, then
/// modes grouped greedily.
fn reference_modes(points: &[(f64, f64)], bw: f64) -> usize {
    let mut modes: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        let mut m = p;
        loop {
            let near: Vec<_> = points
                .iter()
                .filter(|q| ((q.0 - m.0).powi(2) + (q.1 - m.1).powi(2)).sqrt() <= bw)
                .collect();
            let n = near.len() as f64;
            let next = (near.iter().map(|q| q.0).sum::<f64>() / n, near.iter().map(|q| q.1).sum::<f64>() / n);
            let moved = ((next.0 - m.0).powi(2) + (next.1 - m.1).powi(2)).sqrt();
            m = next;
            if moved < 0.1 {
                break;
            }
        }
        if modes.iter().all(|c| ((c.0 - m.0).powi(2) + (c.1 - m.1).powi(2)).sqrt() >= bw / 2.0) {
            modes.push(m);
        }
    }
    modes.len()
}

#[test]
fn meanshift_on_grids_matches_reference() {
    for (n, spacing, bw) in [(6, 10.0, 12.0), (9, 20.0, 25.0), (8, 15.0, 40.0), (5, 50.0, 30.0)] {
        let grid: Vec<(f64, f64)> = (0..n * n).map(|i| ((i % n) as f64 * spacing, (i / n) as f64 * spacing)).collect();
        let c = meanshift_cluster(&grid, bw).unwrap();
        assert_eq!(c.centers.len(), reference_modes(&grid, bw), "grid {n} spacing {spacing} bw {bw}");
        for p in &grid {
            let k = c.assign(*p);
            assert!(k < c.centers.len());
        }
    }
}

#[test]
fn random_distance_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (lw, lh) = (rng.gen_range(0.5..60.0), rng.gen_range(0.5..60.0));
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let dx = rng.gen::<f64>() * lw - rng.gen::<f64>() * lw;
                let dy = rng.gen::<f64>() * lh - rng.gen::<f64>() * lh;
                dx.hypot(dy)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let f = expected_random_distance(lw, lh);
        assert!((f - mean).abs() < 3.0 * se, "{lw}x{lh}: {f} vs {mean} +- {se}");
    }
}

#[test]
fn independent_counts_are_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a: Vec<f64> = (0..100).map(|_| rng.gen_range(1..30) as f64).collect();
    let b: Vec<f64> = (0..100).map(|_| rng.gen_range(1..30) as f64).collect();
    let pairs: Vec<_> = a.iter().zip(&b).map(|(x, y)| (Some(*x as usize), Some(*y as usize))).collect();
    let r = fixation_count_correlation(&pairs).unwrap();
    assert!(r.abs() < 0.3, "r = {r}");
    // permutation null: the observed r is not in the extreme 1%
    let mut shuffled = b.clone();
    let mut extreme = 0;
    for _ in 0..1000 {
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        if pearson(&a, &shuffled).unwrap().abs() >= r.abs() {
            extreme += 1;
        }
    }
    assert!(extreme > 10, "permutation p = {}", extreme as f64 / 1000.0);
}

#[test]
fn chance_last_saccade_matches_random_distance() {
    let cfg = ExperimentConfig::for_experiment(Experiment::Exp2);
    let search = GrayImage::filled("scene", 1280, 1024, 0.5).unwrap();
    let target = GrayImage::filled("t", 40, 40, 0.5).unwrap();
    let backend = InMemoryBackend::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut paths = Vec::new();
    for i in 0..300 {
        let (x, y) = (rng.gen_range(100..1180), rng.gen_range(100..924));
        let trial = Trial::new(format!("t{i}"), Experiment::Exp2, target.clone(), search.clone(), PixelWindow::square(x, y, 40), vec![]).unwrap();
        let p = run_trial(&trial, &SearchPolicy::Chance, &cfg, &backend, i).unwrap();
        paths.push((p, (x as f64, y as f64)));
    }
    let refs: Vec<_> = paths.iter().map(|(p, t)| (p, *t)).collect();
    let profile = distance_to_target_profile(&refs, 32.0, 6);
    let diag = (100f64.powi(2) * 2.0).sqrt() / 32.0;
    assert!(profile[0].iter().all(|d| *d <= diag + 1e-9));
    let l1 = profile[1].iter().sum::<f64>() / profile[1].len() as f64;
    let expected = expected_random_distance(40.0, 32.0);
    assert!((l1 - expected).abs() / expected < 0.1, "L-1 mean {l1} vs {expected}");
}

#[test]
fn direct_hit_profile_is_the_saccade() {
    let trial_target = (500.0, 300.0);
    let p = ivsn::search::Scanpath {
        trial_id: "x".into(),
        policy: "ivsn".into(),
        seed: 0,
        fixations: vec![(100.0, 300.0), trial_target],
        found: true,
        found_at: Some(2),
        termination: Termination::Found,
    };
    let prof = distance_to_target_profile(&[(&p, trial_target)], 32.0, 6);
    assert_eq!(prof[1], vec![400.0 / 32.0]);
}

fn flat_scene(w: usize, h: usize, bbox: PixelWindow) -> Trial {
    Trial::new(
        "s",
        Experiment::Exp3,
        GrayImage::filled("t", 16, 16, 0.5).unwrap(),
        GrayImage::filled("s", w, h, 0.5).unwrap(),
        bbox,
        vec![],
    )
    .unwrap()
}

#[test]
fn half_memory_revisits_strong_peaks() {
    // a tall peak at (20, 20) and a weaker one at (80, 20) below half its height
    let mut map = AttentionMap::zeros(40, 100);
    map.set(20, 20, 1.0);
    map.set(80, 20, 0.4);
    let trial = flat_scene(100, 40, PixelWindow::square(95, 35, 1));
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
    cfg.ior_window = 10;
    cfg.max_fixations = 3;
    let finite = SearchPolicy::IvsnFiniteIor { curve: RecoveryCurve::Constant { retain: 0.5 } };
    let p = run_with_attention(&trial, &finite, &cfg, &InMemoryBackend::new(), 0, map.clone()).unwrap();
    assert_eq!(p.fixations[..2], [(20.0, 20.0), (20.0, 20.0)]);

    let p = run_with_attention(&trial, &SearchPolicy::ivsn(), &cfg, &InMemoryBackend::new(), 0, map).unwrap();
    assert_eq!(p.fixations[..2], [(20.0, 20.0), (80.0, 20.0)]);
}

#[test]
fn recovered_memory_is_measured_as_revisits() {
    let mut map = AttentionMap::zeros(60, 200);
    map.set(30, 30, 1.0);
    map.set(150, 30, 0.9);
    let trial = flat_scene(200, 60, PixelWindow::square(195, 55, 1));
    let mut cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
    cfg.recognition_window = 1;
    cfg.ior_window = 20;
    cfg.max_fixations = 8;
    let curve = RecoveryCurve::Exponential { beta: 1.0, tau: 1.0 };
    let p = run_with_attention(&trial, &SearchPolicy::IvsnFiniteIor { curve }, &cfg, &InMemoryBackend::new(), 0, map).unwrap();
    let r = revisit_probabilities(&[p], 32.0, 3.0, 2);
    assert!(r[1] > 0.0, "alternating peaks revisit at lag 2: {r:?}");
}

#[test]
fn ivsn_on_arrays_fixates_object_centres() {
    let positions = array_positions(1280, 1024, 32.0);
    let mut map = AttentionMap::zeros(1024, 1280);
    for (k, &(x, y)) in positions.iter().enumerate() {
        map.set(x as usize + 30, y as usize, (k + 1) as f64 / 10.0);
    }
    let (tx, ty) = positions[1];
    let trial = Trial::new(
        "a",
        Experiment::Exp1,
        GrayImage::filled("t", 156, 156, 0.5).unwrap(),
        GrayImage::filled("s", 1280, 1024, 0.5).unwrap(),
        PixelWindow::square(tx, ty, 156),
        positions.clone(),
    )
    .unwrap();
    let cfg = ExperimentConfig::for_experiment(Experiment::Exp1);
    let p = run_with_attention(&trial, &SearchPolicy::ivsn(), &cfg, &InMemoryBackend::new(), 0, map).unwrap();
    let expect: Vec<(f64, f64)> = [5, 4, 3, 2, 1].iter().map(|&k| (positions[k].0 as f64, positions[k].1 as f64)).collect();
    assert_eq!(p.fixations, expect);
    assert_eq!(p.found_at, Some(5));
}

#[test]
fn recognition_can_raise_false_alarms() {
    let trial = flat_scene(300, 200, PixelWindow::square(250, 150, 40));
    let mut map = AttentionMap::zeros(200, 300);
    map.set(50, 50, 1.0);
    let cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
    let crop = ivsn::search::recognition_crop((50.0, 50.0), &trial, &cfg).unwrap();
    let mut backend = InMemoryBackend::new();
    backend.insert_vector("t", vec![1.0, 0.0]);
    backend.insert_vector(crop.id(), vec![1.0, 0.1]);
    let policy = SearchPolicy::IvsnRecognition { threshold: 0.9 };
    let p = run_with_attention(&trial, &policy, &cfg, &backend, 0, map).unwrap();
    assert_eq!(p.termination, Termination::FalseAlarm);
    assert!(!p.found);
    assert_eq!(p.len(), 1);
}

#[test]
fn layer_pairs_run_on_the_random_network() {
    let net = RandomConvBackend::new(RandomConvConfig {
        weight_seed: 9,
        weight_mean: 0.0,
        weight_sd: 1000.0,
        stages: vec![ConvStage::new(4, 3, 2, 2), ConvStage::new(6, 3, 1, 2), ConvStage::new(8, 3, 1, 2)],
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let px: Vec<f64> = (0..300 * 260).map(|_| rng.gen()).collect();
    let search = GrayImage::new("scene", 300, 260, px).unwrap();
    let target = search.crop("patch", 100, 60, 48, 48).unwrap();
    let trial = Trial::new("lp", Experiment::Exp3, target, search, PixelWindow::square(124, 84, 48), vec![]).unwrap();
    let cfg = ExperimentConfig::for_experiment(Experiment::Exp3);
    for label in ["ivsn", "ivsn_24_23", "ivsn_17_16", "ivsn_10_9", "ivsn_5_4"] {
        let policy: SearchPolicy = label.parse().unwrap();
        let p = run_trial(&trial, &policy, &cfg, &net, 0).unwrap();
        assert!(!p.is_empty(), "{label}");
        assert_eq!(p.policy, label);
    }
}
