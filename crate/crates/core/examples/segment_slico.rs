//! Segment a synthetic image with SLICO and save the label map.
//!
//! cargo run --example segment_slico -- [regions] [out.pgm]

use vps::prelude::*;
use vps::segmentation::io::{write_partition, Provenance};
use vps::segmentation::DEFAULT_ITERATIONS;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map(|s| s.parse().expect("region count")).unwrap_or(40);
    let out = args.next().unwrap_or_else(|| "slico.pgm".into());

    // two discs on a gradient
    let image = Image::from_fn(96, 72, |x, y| {
        let d1 = (x as i32 - 30).pow(2) + (y as i32 - 36).pow(2);
        let d2 = (x as i32 - 70).pow(2) + (y as i32 - 30).pow(2);
        if d1 < 300 {
            [220, 40, 40]
        } else if d2 < 200 {
            [40, 60, 210]
        } else {
            [(x * 2) as u8 + 20, (y * 3) as u8 + 10, 120]
        }
    })?;
    let partition = segment_slico(&image, k, DEFAULT_ITERATIONS)?;
    let sizes: Vec<usize> = (0..partition.region_count()).map(|r| partition.region_size(r)).collect();
    println!(
        "asked for {k} regions, got {} (sizes {}..={})",
        partition.region_count(),
        sizes.iter().min().unwrap(),
        sizes.iter().max().unwrap()
    );
    let provenance = Provenance::Slico { target_regions: k, iterations: DEFAULT_ITERATIONS };
    write_partition(out.as_ref(), &partition, provenance)?;
    println!("labels written to {out}");
    Ok(())
}
