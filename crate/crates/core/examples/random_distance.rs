//! Expected distance between two uniform points in a rectangle, compared with
//! a Monte Carlo estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivsn::backend::DEFAULT_PIXELS_PER_DEGREE;
use ivsn::metrics::expected_random_distance;
use ivsn::search::{DISPLAY_HEIGHT, DISPLAY_WIDTH};

fn main() {
    let lw = DISPLAY_WIDTH as f64 / DEFAULT_PIXELS_PER_DEGREE;
    let lh = DISPLAY_HEIGHT as f64 / DEFAULT_PIXELS_PER_DEGREE;
    let exact = expected_random_distance(lw, lh);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 500_000;
    let mc = (0..n)
        .map(|_| {
            let (x0, y0) = (rng.gen_range(0.0..lw), rng.gen_range(0.0..lh));
            let (x1, y1) = (rng.gen_range(0.0..lw), rng.gen_range(0.0..lh));
            ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
        })
        .sum::<f64>()
        / n as f64;
    println!("{lw:.1} x {lh:.1} deg display: closed form {exact:.4} deg, Monte Carlo {mc:.4} deg");
}
