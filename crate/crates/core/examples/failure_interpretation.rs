//! Explain a detection that the detector gets wrong. A distractor region
//! suppresses the target's confidence; the attribution shows which cells
//! hold the object and which ones hurt it.

use vps::evaluation::{esr, EvalOptions};
use vps::prelude::*;

fn main() -> Result<()> {
    let blob = BBox::new(0.0, 0.0, 48.0, 16.0)?;
    let distractor = BBox::new(0.0, 0.0, 16.0, 16.0)?;
    let world = BlobWorld::single(blob, "bird", 1.0).with_inhibitor(distractor, 0.9);
    let detector = BlobDetector::new(world);
    let image = Image::from_fn(48, 16, |x, y| [(x * 5) as u8 + 1, (y * 9) as u8 + 1, 30])?;
    let partition = grid_partition(48, 16, 1, 3)?;
    let target = ExplanationTarget::new(blob, "bird");

    let full = detector.detect(&image).map_err(Error::from)?;
    let best = full.best_response(&target, false).map(|r| r.product()).unwrap_or(0.0);
    println!("full image: iou x score = {best:.3}");

    let result = greedy_search(&detector, &image, &partition, &target, &SearchOptions::default())?;
    println!("order {:?}, attribution {:.3?}", result.order, result.raw_scores);
    let opts = EvalOptions::default();
    for order in [result.order.clone(), vec![0, 1, 2]] {
        let out = esr(&detector, &image, &partition, &order, &target, 0.35, 3, &opts)?;
        println!("ordering {order:?}: minimal explaining prefix {:?}", out.minimal_prefix);
    }
    Ok(())
}
