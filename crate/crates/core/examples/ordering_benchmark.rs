//! Greedy versus random and reversed orderings on the seeded synthetic suite.

use vps::bench::{run_benchmark, SuiteSpec};

fn main() -> vps::Result<()> {
    let spec = SuiteSpec {
        samples: 10,
        random_orderings: 5,
        ..Default::default()
    };
    let table = run_benchmark(&spec, 4)?;
    println!("{:<12} {:>10} {:>10}", "ordering", "insertion", "deletion");
    for s in &table.summary {
        println!("{:<12} {:>10.4} {:>10.4}", s.ordering, s.insertion_mean, s.deletion_mean);
    }
    Ok(())
}
