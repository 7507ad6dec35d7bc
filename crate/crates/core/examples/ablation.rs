//! Score-component and threshold ablations on the synthetic suite.

use vps::bench::{clue_aucs, SuiteSpec};
use vps::prelude::*;

fn main() -> Result<()> {
    let samples = SuiteSpec { samples: 10, ..Default::default() }.generate()?;
    let opts = SearchOptions::default().with_workers(4);
    for mode in [ScoreMode::Combined, ScoreMode::ClueOnly, ScoreMode::CollaborationOnly] {
        let (mut ins, mut del) = (0.0, 0.0);
        for s in &samples {
            let det = s.detector();
            let r = greedy_search(&det, &s.image, &s.partition, &s.target, &opts.with_mode(mode))?;
            let (i, d) = clue_aucs(&det, s, &r.order)?;
            ins += i;
            del += d;
        }
        let n = samples.len() as f64;
        println!("{mode:?}: insertion {:.4} deletion {:.4}", ins / n, del / n);
    }

    // thresholds only affect the search; curves always see every detection
    for t in [0.0, 0.2, 0.35, 0.5] {
        let mut ins = 0.0;
        for s in &samples {
            let det = s.detector();
            let filtered = ScoreThreshold::new(&det, t)?;
            let r = greedy_search(&filtered, &s.image, &s.partition, &s.target, &opts)?;
            ins += clue_aucs(&det, s, &r.order)?.0;
        }
        println!("threshold {t}: insertion {:.4}", ins / samples.len() as f64);
    }
    Ok(())
}
