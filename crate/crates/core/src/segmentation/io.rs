//! Partition files: a 16-bit binary PGM of region labels plus a JSON sidecar.
//!
//! For `labels.pgm` the sidecar lives at `labels.json`.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use super::RegionPartition;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    Slico { target_regions: usize, iterations: usize },
    Grid { rows: u32, cols: u32 },
    External { note: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeta {
    pub region_count: usize,
    pub width: u32,
    pub height: u32,
    pub provenance: Provenance,
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

pub fn encode_pgm(partition: &RegionPartition) -> Result<Vec<u8>> {
    if partition.region_count() > u16::MAX as usize + 1 {
        return Err(Error::invalid(format!(
            "{} regions do not fit a 16-bit label map",
            partition.region_count()
        )));
    }
    // binary 16-bit PGM: big-endian samples after a plain header
    let mut out = format!("P5\n{} {}\n65535\n", partition.width(), partition.height()).into_bytes();
    out.reserve(partition.labels().len() * 2);
    for &l in partition.labels() {
        out.extend_from_slice(&(l as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<RegionPartition> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::invalid("partition file must be a 16-bit grayscale PGM"));
    };
    let (w, h) = buf.dimensions();
    let labels = buf.into_raw().into_iter().map(u32::from).collect();
    RegionPartition::from_labels(w, h, labels)
}

/// Writes `path` (PGM) and its JSON sidecar.
pub fn write_partition(path: &Path, partition: &RegionPartition, provenance: Provenance) -> Result<()> {
    let meta = PartitionMeta {
        region_count: partition.region_count(),
        width: partition.width(),
        height: partition.height(),
        provenance,
    };
    let pgm = encode_pgm(partition)?;
    std::fs::write(path, pgm).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&side, e))
}

/// Reads a PGM label map and checks it against its sidecar.
pub fn read_partition(path: &Path) -> Result<(RegionPartition, PartitionMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let partition = decode_pgm(&bytes)?;
    let side = sidecar_path(path);
    let meta_bytes = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let meta: PartitionMeta = serde_json::from_slice(&meta_bytes)?;
    if meta.region_count != partition.region_count()
        || meta.width != partition.width()
        || meta.height != partition.height()
    {
        return Err(Error::invalid(format!(
            "{}: sidecar describes {}×{} with {} regions, label map has {}×{} with {}",
            path.display(),
            meta.width,
            meta.height,
            meta.region_count,
            partition.width(),
            partition.height(),
            partition.region_count()
        )));
    }
    Ok((partition, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::grid_partition;

    #[test]
    fn pgm_is_16_bit_binary() {
        let p = grid_partition(7, 5, 1, 2).unwrap();
        let bytes = encode_pgm(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let header = String::from_utf8_lossy(&bytes[..20]);
        assert!(header.contains("65535"), "{header}");
        assert_eq!(decode_pgm(&bytes).unwrap(), p);
    }

    #[test]
    fn file_roundtrip_and_sidecar_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        let p = grid_partition(12, 9, 3, 4).unwrap();
        write_partition(&path, &p, Provenance::Grid { rows: 3, cols: 4 }).unwrap();
        let (back, meta) = read_partition(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(meta.region_count, 12);

        let mut bad = meta.clone();
        bad.region_count = 11;
        std::fs::write(sidecar_path(&path), serde_json::to_vec(&bad).unwrap()).unwrap();
        assert!(read_partition(&path).is_err());
    }
}
