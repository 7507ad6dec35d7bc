//! Full metric battery for one attribution: insertion and deletion AUCs in
//! three variants, average highest score, pointing games and ESR.

use vps::evaluation::{evaluate, EvalOptions};
use vps::prelude::*;

fn main() -> Result<()> {
    let blob = BBox::new(10.0, 10.0, 34.0, 30.0)?;
    let detector = BlobDetector::new(BlobWorld::single(blob, "car", 1.0));
    let image = Image::from_fn(40, 40, |x, y| [(x * 6) as u8 + 1, 90, (y * 6) as u8 + 1])?;
    let partition = grid_partition(40, 40, 5, 5)?;
    let target = ExplanationTarget::new(blob, "car");
    let result = greedy_search(&detector, &image, &partition, &target, &SearchOptions::default())?;

    let (report, traces) = evaluate(
        &detector,
        &image,
        &partition,
        &result.order,
        &result.saliency,
        &target,
        &EvalOptions::default(),
    )?;
    println!("{:>10} {:>8} {:>8} {:>8}", "", "clue", "class", "iou");
    for (name, a) in [("insertion", &report.insertion), ("deletion", &report.deletion)] {
        println!("{name:>10} {:>8.4} {:>8.4} {:>8.4}", a.clue, a.class, a.iou);
    }
    println!("average highest score {:.4}", report.avg_highest_score);
    println!("point game {}  energy point game {:.4}", report.point_game, report.energy_pg);
    match report.esr.minimal_prefix {
        Some(t) => println!("explained with the top {t} of {} regions", partition.region_count()),
        None => println!("no prefix reached the ESR threshold"),
    }
    let ins: Vec<String> = traces.insertion.steps.iter().map(|s| format!("{:.2}", s.clue)).collect();
    println!("insertion clue curve: {}", ins.join(" "));
    Ok(())
}
