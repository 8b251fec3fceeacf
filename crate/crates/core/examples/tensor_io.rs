//! Writes a feature map in the IVSNT1 format, reads it back and correlates it
//! against a larger map.

use ivsn::tensor::{argmax_pixel, xcorr2d_multichannel, FeatureMap, Scale};

fn main() -> ivsn::Result<()> {
    let kernel = FeatureMap::new(2, 2, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5], Scale::ONE)?;

    let mut search = FeatureMap::zeros(2, 8, 8, Scale::integer(16)?)?;
    for ch in 0..2 {
        for r in 0..2 {
            for c in 0..2 {
                search.set(ch, 5 + r, 3 + c, kernel.get(ch, r, c));
            }
        }
    }

    let path = std::env::temp_dir().join("ivsn_tensor_io_example.ivsnt");
    search.save(&path)?;
    let loaded = FeatureMap::load(&path)?;
    assert_eq!(loaded, search);
    println!(
        "round trip: {} channels, {}x{} cells at {} px/cell",
        loaded.channels(),
        loaded.height(),
        loaded.width(),
        loaded.scale().as_f64()
    );

    let map = xcorr2d_multichannel(&loaded, &kernel)?;
    let (x, y) = argmax_pixel(&map).expect("non-empty map");
    println!("attention map {}x{}, peak at ({x}, {y})", map.width(), map.height());
    std::fs::remove_file(&path).ok();
    Ok(())
}
