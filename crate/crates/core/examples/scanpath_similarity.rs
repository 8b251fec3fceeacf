//! Clusters fixations, scores scanpath pairs by alignment and correlates
//! fixation counts.

use ivsn::metrics::{fixation_count_correlation, meanshift_cluster, sequence_score};

fn main() -> ivsn::Result<()> {
    let a = [(100.0, 100.0), (400.0, 120.0), (410.0, 380.0), (120.0, 390.0)];
    let b = [(105.0, 95.0), (395.0, 125.0), (130.0, 385.0)];
    let c = [(120.0, 390.0), (410.0, 380.0), (400.0, 120.0), (100.0, 100.0)];

    let pooled: Vec<(f64, f64)> = a.iter().chain(&b).chain(&c).copied().collect();
    let clustering = meanshift_cluster(&pooled, 45.0)?;
    println!("{} clusters from {} fixations", clustering.centers.len(), pooled.len());

    for (name, other) in [("a~b", &b[..]), ("a~c", &c[..]), ("a~a", &a[..])] {
        let s = sequence_score(&a, other, &clustering, None)?;
        println!("{name}: score {:.3}, labels {:?} vs {:?}", s.score, s.labels_a, s.labels_b);
    }
    let s = sequence_score(&a, &b, &clustering, Some(2))?;
    println!("a~b first 2 fixations: {:.3}", s.score);

    let counts = [(Some(3), Some(4)), (Some(7), Some(6)), (Some(1), Some(2)), (None, Some(9)), (Some(5), Some(5))];
    println!("fixation-count correlation: {:.3}", fixation_count_correlation(&counts)?);
    Ok(())
}
