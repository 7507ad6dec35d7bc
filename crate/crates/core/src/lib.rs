//! Black-box explanations for object detectors by greedy submodular sub-region search.
//!
//! An image is sparsified into sub-regions ([`segmentation`]), a detector is
//! queried on masked copies of it ([`detector`]), and the sub-regions are
//! ranked greedily by a clue + collaboration objective ([`scoring`],
//! [`search`]). The resulting ordering is rasterized into a saliency map and
//! scored with insertion/deletion AUCs, pointing games and the explaining
//! successful rate ([`evaluation`]).
//!
//! ```no_run
//! use vps::prelude::*;
//!
//! let world = BlobWorld::single(BBox::new(10.0, 10.0, 30.0, 30.0)?, "dog", 1.0);
//! let detector = BlobDetector::new(world);
//! let image = Image::filled(40, 40, [200, 120, 60])?;
//! let partition = grid_partition(40, 40, 4, 4)?;
//! let target = ExplanationTarget::new(BBox::new(10.0, 10.0, 30.0, 30.0)?, "dog");
//! let result = greedy_search(&detector, &image, &partition, &target, &SearchOptions::default())?;
//! println!("most important region: {}", result.order[0]);
//! # Ok::<(), vps::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod detection;
pub mod detector;
mod error;
pub mod evaluation;
pub mod geometry;
pub mod raster;
pub mod scoring;
pub mod search;
pub mod segmentation;

pub use error::{DetectorError, Error, Result};

pub mod prelude {
    pub use crate::detection::{Category, Detection, DetectionSet, ExplanationTarget};
    pub use crate::detector::blob::{BlobDetector, BlobObject, BlobWorld, Inhibitor};
    pub use crate::detector::{CountingDetector, Detector, ScoreThreshold};
    pub use crate::evaluation::{
        auc, average_highest_score, curve, energy_point_game, esr, point_game, Direction,
        StepCurve, Variant,
    };
    pub use crate::geometry::{iou, BBox};
    pub use crate::raster::Image;
    pub use crate::scoring::{submodular_value, Objective, ScoreBreakdown, ScoreMode};
    pub use crate::search::{
        brute_force_best, greedy_search, normalize_attribution, rasterize, AttributionResult,
        SaliencyMap, SearchOptions,
    };
    pub use crate::segmentation::{
        grid_partition, reveal, segment_slico, RegionPartition, RegionSet,
    };
    pub use crate::{Error, Result};
}
