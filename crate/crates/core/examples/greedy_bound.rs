//! Compare greedy prefixes with the exhaustive optimum on random blob
//! worlds.

use vps::bench::{random_blob_instance, sample_rng};
use vps::search::{bound_check, GREEDY_BOUND};
use vps::prelude::*;

fn main() -> Result<()> {
    let mut worst = f64::INFINITY;
    for i in 0..10 {
        let mut rng = sample_rng(11, i);
        let s = random_blob_instance(&mut rng, 30, 30, 3, 3, (0.5, 2.0), 6)?;
        let ks: Vec<usize> = (1..=s.partition.region_count()).collect();
        let reports = bound_check(&s.detector(), &s.image, &s.partition, &s.target, &ks, &SearchOptions::default())?;
        let min = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        worst = worst.min(min);
        println!("instance {i}: lowest greedy/optimum ratio {min:.4}");
    }
    println!("worst {worst:.4} (bound {GREEDY_BOUND:.4})");
    Ok(())
}
