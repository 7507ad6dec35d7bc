//! Drive the search through a detector that speaks the wire protocol.
//!
//! cargo run --example wire_detector -- stdio:python3 my_server.py
//! cargo run --example wire_detector -- http://127.0.0.1:8000
//!
//! Without an argument a tiny shell server that always answers with the
//! same box is started over stdio.

use vps::detector::wire::{Endpoint, WireDetector};
use vps::prelude::*;

const ECHO_SERVER: &str = r#"while read -r line; do
  echo '{"detections":[{"box":[8,8,24,24],"scores":{"dog":0.8}}],"scores_available":true}'
done
"#;

fn main() -> Result<()> {
    let arg = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let script = std::env::temp_dir().join("vps-echo-server.sh");
    let endpoint: Endpoint = if arg.is_empty() {
        std::fs::write(&script, ECHO_SERVER).expect("writing the echo server script");
        format!("stdio:sh {}", script.display()).parse()?
    } else {
        arg.parse()?
    };
    println!("detector: {endpoint}");
    let detector = WireDetector::connect(endpoint, vec![Category::from("dog")], 300)?;

    let image = Image::from_fn(32, 32, |x, y| [(x * 8) as u8, (y * 8) as u8, 77])?;
    let partition = grid_partition(32, 32, 2, 2)?;
    let target = ExplanationTarget::new(BBox::new(8.0, 8.0, 24.0, 24.0)?, "dog");
    let result = greedy_search(&detector, &image, &partition, &target, &SearchOptions::default())?;
    println!("order {:?} after {} detector calls", result.order, result.stats.detector_calls);
    Ok(())
}
