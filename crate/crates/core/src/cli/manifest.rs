//! Newline-delimited JSON manifests, one sample per line:
//!
//! ```json
//! {"image_path": "img/001.png", "target_box": [12, 30, 80, 96], "category": "dog", "sample_kind": "correct"}
//! ```
//!
//! Relative image paths resolve against the manifest's directory. Blank
//! lines are skipped. A malformed line does not invalidate the others.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{Category, ExplanationTarget};
use crate::geometry::BBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    #[default]
    Correct,
    Misclassified,
    Undetected,
    GroundingFailure,
}

impl SampleKind {
    pub fn is_failure(self) -> bool {
        self != SampleKind::Correct
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleKind::Correct => "correct",
            SampleKind::Misclassified => "misclassified",
            SampleKind::Undetected => "undetected",
            SampleKind::GroundingFailure => "grounding_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Stable sample id; defaults to the zero-padded line number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image_path: PathBuf,
    pub target_box: BBox,
    pub category: Category,
    #[serde(default)]
    pub sample_kind: SampleKind,
}

impl ManifestEntry {
    pub fn target(&self) -> ExplanationTarget {
        ExplanationTarget::new(self.target_box, self.category.clone())
    }
}

/// A manifest line after parsing; `entry` carries the per-line error when
/// the line was malformed.
#[derive(Debug)]
pub struct ManifestLine {
    pub id: String,
    pub entry: Result<ManifestEntry>,
}

fn line_id(line_no: usize) -> String {
    format!("{line_no:04}")
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "sample id {id:?} must be non-empty ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}

/// Parses manifest text. `base` is the directory relative paths resolve to.
pub fn parse_manifest(text: &str, base: &Path) -> Vec<ManifestLine> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fallback = line_id(i + 1);
            match serde_json::from_str::<ManifestEntry>(l) {
                Ok(mut e) => {
                    let id = e.id.clone().unwrap_or(fallback);
                    if e.image_path.is_relative() {
                        e.image_path = base.join(&e.image_path);
                    }
                    let entry = check_id(&id).map(|_| e);
                    ManifestLine { id, entry }
                }
                Err(err) => ManifestLine {
                    id: fallback,
                    entry: Err(Error::invalid(format!("manifest line {}: {err}", i + 1))),
                },
            }
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let lines = parse_manifest(&text, base);
    let mut seen = std::collections::BTreeSet::new();
    for l in &lines {
        if !seen.insert(l.id.clone()) {
            return Err(Error::Config(format!("duplicate sample id {:?} in manifest", l.id)));
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_isolates_bad_lines() {
        let text = r#"{"image_path":"a.png","target_box":[1,2,3,4],"category":"dog","sample_kind":"misclassified"}

{"image_path":"/abs/b.png","target_box":[1,2,3],"category":"dog"}
{"id":"s-3","image_path":"c.png","target_box":[0,0,5,5],"category":"cat"}
{"image_path":"d.png","target_box":[0,0,5,5],"category":"cat","sample_kind":"sideways"}
"#;
        let lines = parse_manifest(text, Path::new("/data"));
        assert_eq!(lines.len(), 4);
        let first = lines[0].entry.as_ref().unwrap();
        assert_eq!(lines[0].id, "0001");
        assert_eq!(first.image_path, PathBuf::from("/data/a.png"));
        assert_eq!(first.sample_kind, SampleKind::Misclassified);
        assert!(lines[1].entry.is_err());
        assert_eq!(lines[1].id, "0003");
        assert_eq!(lines[2].id, "s-3");
        assert_eq!(lines[2].entry.as_ref().unwrap().sample_kind, SampleKind::Correct);
        assert!(lines[3].entry.is_err());
    }

    #[test]
    fn unsafe_ids_are_rejected() {
        let text = r#"{"id":"../x","image_path":"a.png","target_box":[1,2,3,4],"category":"dog"}"#;
        assert!(parse_manifest(text, Path::new("."))[0].entry.is_err());
    }

    #[test]
    fn kinds_roundtrip() {
        for k in [
            SampleKind::Correct,
            SampleKind::Misclassified,
            SampleKind::Undetected,
            SampleKind::GroundingFailure,
        ] {
            let s = serde_json::to_string(&k).unwrap();
            assert_eq!(s, format!("\"{k}\""));
            assert_eq!(serde_json::from_str::<SampleKind>(&s).unwrap(), k);
        }
    }
}
