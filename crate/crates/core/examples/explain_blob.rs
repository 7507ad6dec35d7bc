//! Rank the grid cells of an image for one detection and print the
//! saliency map as text.

use vps::prelude::*;

fn main() -> Result<()> {
    let blob = BBox::new(16.0, 8.0, 40.0, 32.0)?;
    let detector = BlobDetector::new(BlobWorld::single(blob, "dog", 1.5));
    let image = Image::from_fn(48, 48, |x, y| [(x * 5) as u8 + 1, (y * 5) as u8 + 1, 128])?;
    let partition = grid_partition(48, 48, 6, 6)?;
    let target = ExplanationTarget::new(blob, "dog");

    let result = greedy_search(&detector, &image, &partition, &target, &SearchOptions::default().with_workers(4))?;
    println!(
        "{} evaluations, {} detector calls",
        result.stats.evaluations, result.stats.detector_calls
    );
    println!("top regions: {:?}", &result.order[..6]);
    println!("F along the ordering: {:.3?}", &result.f_trace[..6]);

    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for y in (0..48).step_by(4) {
        let row: String = (0..48)
            .step_by(2)
            .map(|x| shades[(result.saliency.get(x, y) * 9.0).round() as usize])
            .collect();
        println!("|{row}|");
    }
    Ok(())
}
