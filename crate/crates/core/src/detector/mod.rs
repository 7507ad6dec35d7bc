//! The black-box detector contract and its backends.
//!
//! Every backend maps an (optionally masked) [`Image`] to a [`DetectionSet`].
//! Masked pixels are recognized by value only, so synthetic and remote
//! detectors see exactly the same inputs.

pub mod blob;
pub mod wire;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::detection::{Category, DetectionSet};
use crate::raster::Image;
use crate::{DetectorError, Error, Result};

pub const DEFAULT_N_MAX: usize = 300;

pub trait Detector: Send + Sync {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError>;

    /// Short stable description recorded alongside results.
    fn fingerprint(&self) -> String;
}

impl<D: Detector + ?Sized> Detector for &D {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        (**self).detect(image)
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        (**self).detect(image)
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

impl<D: Detector + ?Sized> Detector for Arc<D> {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        (**self).detect(image)
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Drops detections whose best confidence is below `threshold`.
pub struct ScoreThreshold<D> {
    inner: D,
    threshold: f64,
}

impl<D: Detector> ScoreThreshold<D> {
    pub fn new(inner: D, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!("score threshold {threshold} outside [0, 1]")));
        }
        Ok(Self { inner, threshold })
    }
}

impl<D: Detector> Detector for ScoreThreshold<D> {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        let mut set = self.inner.detect(image)?;
        set.detections.retain(|d| d.best_score() >= self.threshold);
        Ok(set)
    }

    fn fingerprint(&self) -> String {
        format!("{}+threshold({})", self.inner.fingerprint(), self.threshold)
    }
}

/// Counts forward passes of the wrapped detector.
pub struct CountingDetector<D> {
    inner: D,
    calls: AtomicUsize,
}

impl<D: Detector> CountingDetector<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> D {
        self.inner
    }
}

impl<D: Detector> Detector for CountingDetector<D> {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.detect(image)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// Where detections come from, as named on the command line:
/// `blob:world.json`, `wire:http://host:port` or `wire:stdio:<command>`.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    SyntheticBlob(PathBuf),
    Wire(wire::Endpoint),
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("blob:") {
            Ok(DetectorKind::SyntheticBlob(PathBuf::from(path)))
        } else if let Some(rest) = s.strip_prefix("wire:") {
            Ok(DetectorKind::Wire(rest.parse()?))
        } else {
            Err(Error::Config(format!(
                "detector {s:?} must be blob:<world.json> or wire:<url>"
            )))
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::SyntheticBlob(p) => write!(f, "blob:{}", p.display()),
            DetectorKind::Wire(e) => write!(f, "wire:{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    /// Vocabulary sent to wire backends; synthetic worlds use their own.
    pub categories: Vec<Category>,
    pub n_max: usize,
    pub score_threshold: Option<f64>,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            categories: Vec::new(),
            n_max: DEFAULT_N_MAX,
            score_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        if let Some(t) = self.score_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("score threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// The backend with any score threshold applied.
    pub fn build(&self) -> Result<Box<dyn Detector>> {
        let base = self.build_unfiltered()?;
        Ok(match self.score_threshold {
            Some(t) => Box::new(ScoreThreshold::new(base, t)?),
            None => base,
        })
    }

    /// The backend ignoring `score_threshold`.
    pub fn build_unfiltered(&self) -> Result<Box<dyn Detector>> {
        self.validate()?;
        let base: Box<dyn Detector> = match &self.kind {
            DetectorKind::SyntheticBlob(path) => {
                let world = blob::BlobWorld::load(path)?;
                Box::new(blob::BlobDetector::new(world).with_n_max(self.n_max))
            }
            DetectorKind::Wire(endpoint) => Box::new(wire::WireDetector::connect(
                endpoint.clone(),
                self.categories.clone(),
                self.n_max,
            )?),
        };
        Ok(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;
    use crate::geometry::BBox;

    struct Fixed(DetectionSet);

    impl Detector for Fixed {
        fn detect(&self, _: &Image) -> Result<DetectionSet, DetectorError> {
            Ok(self.0.clone())
        }
        fn fingerprint(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn threshold_and_counting() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let set = DetectionSet::new(vec![
            Detection::single(b, "a", 0.1).unwrap(),
            Detection::single(b, "a", 0.5).unwrap(),
        ]);
        let det = CountingDetector::new(ScoreThreshold::new(Fixed(set), 0.35).unwrap());
        let img = Image::filled(1, 1, [0; 3]).unwrap();
        assert_eq!(det.detect(&img).unwrap().len(), 1);
        det.detect(&img).unwrap();
        assert_eq!(det.calls(), 2);
        assert!(ScoreThreshold::new(Fixed(DetectionSet::empty()), 1.5).is_err());
    }

    #[test]
    fn parses_detector_kinds() {
        assert_eq!(
            "blob:w.json".parse::<DetectorKind>().unwrap(),
            DetectorKind::SyntheticBlob("w.json".into())
        );
        assert!(matches!(
            "wire:http://127.0.0.1:9000".parse::<DetectorKind>().unwrap(),
            DetectorKind::Wire(wire::Endpoint::Http(_))
        ));
        assert!(matches!(
            "wire:stdio:python3 server.py".parse::<DetectorKind>().unwrap(),
            DetectorKind::Wire(wire::Endpoint::Stdio(_))
        ));
        assert!("yolo:x".parse::<DetectorKind>().is_err());
    }
}
