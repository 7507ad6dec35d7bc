use std::io::{Cursor, Read, Write};
use std::path::Path;

use image::{GrayImage, ImageFormat};

use crate::segmentation::RegionPartition;
use crate::{Error, Result};

/// Per-pixel importance in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "saliency map of {width}×{height} cannot hold {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("saliency value {v} is negative or non-finite")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// 8-bit grayscale PNG with value `round(255 · s)`.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let raw = self
            .values
            .iter()
            .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
            .collect();
        let img = GrayImage::from_raw(self.width, self.height, raw).expect("sizes checked");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Raw dump: the ASCII header line `f32le <width> <height>\n`, then
    /// `width · height` little-endian `f32` values in row-major order.
    pub fn write_raw(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "f32le {} {}", self.width, self.height)?;
        for v in &self.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<saliency raw>", e))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::invalid("raw saliency dump has no header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::invalid(e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (w, h) = match fields[..] {
            ["f32le", w, h] => (
                w.parse::<u32>().map_err(|e| Error::invalid(e.to_string()))?,
                h.parse::<u32>().map_err(|e| Error::invalid(e.to_string()))?,
            ),
            _ => return Err(Error::invalid(format!("bad raw saliency header {header:?}"))),
        };
        let body = &bytes[nl + 1..];
        if body.len() != w as usize * h as usize * 4 {
            return Err(Error::invalid("raw saliency body length does not match header"));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(w, h, values)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?).map_err(|e| Error::io(path, e))
    }
}

/// Min-max normalization of per-rank scores; a constant input maps to ones.
pub fn normalize_attribution(raw_scores: &[f64]) -> Vec<f64> {
    let max = raw_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = raw_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let span = max - min;
    if span.is_nan() || span <= 0.0 {
        return vec![1.0; raw_scores.len()];
    }
    raw_scores.iter().map(|a| (a - min) / span).collect()
}

/// Paints every pixel with the normalized score of its region's rank.
pub fn rasterize(partition: &RegionPartition, order: &[usize], normalized: &[f64]) -> Result<SaliencyMap> {
    let m = partition.region_count();
    if order.len() != m || normalized.len() != m {
        return Err(Error::invalid(format!(
            "ordering has {} entries and scores {}, partition has {m} regions",
            order.len(),
            normalized.len()
        )));
    }
    let mut region_score = vec![f64::NAN; m];
    for (rank, &r) in order.iter().enumerate() {
        if r >= m || !region_score[r].is_nan() {
            return Err(Error::invalid(format!("ordering is not a permutation (region {r})")));
        }
        region_score[r] = normalized[rank];
    }
    let values = partition
        .labels()
        .iter()
        .map(|&l| region_score[l as usize])
        .collect();
    SaliencyMap::new(partition.width(), partition.height(), values)
}
