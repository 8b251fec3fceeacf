use proptest::prelude::*;

use ivsn::backend::{tile_image, GrayImage, TILE_SIZE};
use ivsn::metrics::{
    meanshift_cluster, needleman_wunsch, sequence_score, FixationClustering, PerformanceCurve,
};
use ivsn::tensor::{
    argmax_pixel, normalize01, suppress_window, xcorr2d_valid, AttentionMap, FeatureMap, PixelWindow, Scale,
};

fn feature_pair() -> impl Strategy<Value = (FeatureMap, FeatureMap, FeatureMap)> {
    (1usize..4, 1usize..8, 1usize..8).prop_flat_map(|(c, h, w)| {
        (1..=h, 1..=w).prop_flat_map(move |(kh, kw)| {
            (
                prop::collection::vec(-4.0f64..4.0, c * h * w),
                prop::collection::vec(-4.0f64..4.0, c * h * w),
                prop::collection::vec(-4.0f64..4.0, c * kh * kw),
            )
                .prop_map(move |(a, b, k)| {
                    (
                        FeatureMap::new(c, h, w, a, Scale::ONE).unwrap(),
                        FeatureMap::new(c, h, w, b, Scale::ONE).unwrap(),
                        FeatureMap::new(c, kh, kw, k, Scale::ONE).unwrap(),
                    )
                })
        })
    })
}

fn attention() -> impl Strategy<Value = AttentionMap> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..10.0, h * w).prop_map(move |v| AttentionMap::new(h, w, v).unwrap())
    })
}

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..300.0, 0.0f64..300.0), 1..max)
}

proptest! {
    #[test]
    fn correlation_is_bilinear((a, b, k) in feature_pair(), s in -3.0f64..3.0) {
        let combo: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| s * x + y).collect();
        let combo = FeatureMap::new(a.channels(), a.height(), a.width(), combo, Scale::ONE).unwrap();
        let lhs = xcorr2d_valid(&combo, &k).unwrap();
        let ra = xcorr2d_valid(&a, &k).unwrap();
        let rb = xcorr2d_valid(&b, &k).unwrap();
        for ((l, x), y) in lhs.values().iter().zip(ra.values()).zip(rb.values()) {
            prop_assert!((l - (s * x + y)).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_keeps_the_winner(m in attention()) {
        let n = normalize01(&m);
        prop_assert!(n.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let lo = m.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            prop_assert_eq!(argmax_pixel(&n), argmax_pixel(&m));
        }
    }

    #[test]
    fn suppression_is_idempotent(m in attention(), cx in -3i64..15, cy in -3i64..15, side in 1u32..9) {
        let win = PixelWindow::square(cx, cy, side);
        let once = suppress_window(&m, &win);
        let twice = suppress_window(&once, &win);
        prop_assert_eq!(once.values(), twice.values());
        for y in 0..m.height() {
            for x in 0..m.width() {
                let inside = win.contains(x as i64, y as i64);
                prop_assert_eq!(once.get(x, y), if inside { 0.0 } else { m.get(x, y) });
            }
        }
    }

    #[test]
    fn tiles_partition_the_image(w in 1usize..700, h in 1usize..500) {
        let img = GrayImage::filled("p", w, h, 0.0).unwrap();
        let mut cover = vec![0u8; w * h];
        for t in tile_image(&img, TILE_SIZE) {
            prop_assert!(t.image.width() <= TILE_SIZE && t.image.height() <= TILE_SIZE);
            for y in 0..t.image.height() {
                for x in 0..t.image.width() {
                    cover[(t.offset_y + y) * w + t.offset_x + x] += 1;
                }
            }
        }
        prop_assert!(cover.iter().all(|&c| c == 1));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in points(8), b in points(8), pool in points(20), bw in 5.0f64..80.0) {
        let c = meanshift_cluster(&pool, bw).unwrap();
        let ab = sequence_score(&a, &b, &c, None).unwrap().score;
        let ba = sequence_score(&b, &a, &c, None).unwrap().score;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(sequence_score(&a, &a, &c, None).unwrap().score, 1.0);
    }

    #[test]
    fn similarity_ignores_rigid_translation(a in points(6), b in points(6), centers in points(6), dx in -500i32..500, dy in -500i32..500) {
        let (dx, dy) = (dx as f64, dy as f64);
        let shift = |v: &[(f64, f64)]| -> Vec<(f64, f64)> { v.iter().map(|&(x, y)| (x + dx, y + dy)).collect() };
        let c = FixationClustering::new(centers.clone(), 40.0).unwrap();
        let moved = FixationClustering::new(shift(&centers), 40.0).unwrap();
        let s0 = sequence_score(&a, &b, &c, None).unwrap();
        let s1 = sequence_score(&shift(&a), &shift(&b), &moved, None).unwrap();
        prop_assert!((s0.score - s1.score).abs() < 1e-9);
    }

    #[test]
    fn alignment_never_exceeds_shorter_length(a in prop::collection::vec(0usize..5, 0..9), b in prop::collection::vec(0usize..5, 0..9)) {
        let s = needleman_wunsch(&a, &b, |x, y| if x == y { 1.0 } else { 0.25 });
        prop_assert!(s <= a.len().min(b.len()) as f64 + 1e-12);
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn curves_are_monotone_and_order_free(mut found in prop::collection::vec(prop::option::of(1usize..12), 1..60), max_n in 1usize..15) {
        let c = PerformanceCurve::from_found_at("x", &found, max_n).unwrap();
        prop_assert!(c.cumulative.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.cumulative.iter().all(|p| (0.0..=1.0).contains(p)));
        found.reverse();
        let r = PerformanceCurve::from_found_at("x", &found, max_n).unwrap();
        prop_assert_eq!(c.cumulative, r.cumulative);
    }

    #[test]
    fn ivsnt_round_trip(c in 1usize..5, h in 1usize..6, w in 1usize..6, num in 1u32..32, den in 1u32..4) {
        let data: Vec<f64> = (0..c * h * w).map(|i| (i as f32 * 0.37 - 3.0) as f64).collect();
        let scale = Scale::new(num, den).unwrap();
        let fm = FeatureMap::new(c, h, w, data, scale).unwrap();
        let mut bytes = Vec::new();
        fm.write_ivsnt(&mut bytes).unwrap();
        let back = FeatureMap::read_ivsnt(&bytes[..]).unwrap();
        prop_assert_eq!(back.data(), fm.data());
        prop_assert_eq!(back.scale(), fm.scale());
        let mut again = Vec::new();
        back.write_ivsnt(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }
}
