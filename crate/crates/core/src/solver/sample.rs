use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{decode_f64, with_ext, NoiseGrid};

/// Provenance of a field realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: Option<u64>,
    pub variant: String,
    pub level: Option<u32>,
}

/// One realization `X(t, x)` on the recorded times and evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: NoiseGrid,
    pub t0: f64,
    /// Time-grid indices of the recorded rows.
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub eval_points: Vec<[f64; 3]>,
    /// `times × eval_points`, time-major.
    #[serde(skip)]
    pub values: Vec<f64>,
    pub meta: SampleMeta,
}

impl FieldSample {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn num_points(&self) -> usize {
        self.eval_points.len()
    }

    pub fn value(&self, time: usize, point: usize) -> f64 {
        self.values[time * self.num_points() + point]
    }

    pub fn row(&self, time: usize) -> &[f64] {
        let n = self.num_points();
        &self.values[time * n..(time + 1) * n]
    }

    /// Row index of a recorded time, matched to `1e-9` relative.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.grid.horizon;
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Whether `other` has the same times and evaluation points.
    pub fn same_layout(&self, other: &FieldSample) -> bool {
        self.times == other.times && self.eval_points == other.eval_points
    }

    /// Pointwise difference `self − other`.
    pub fn difference(&self, other: &FieldSample) -> Result<FieldSample> {
        if !self.same_layout(other) {
            return Err(Error::GridMismatch("fields are sampled on different grids".into()));
        }
        Ok(FieldSample {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            meta: SampleMeta {
                seed: self.meta.seed,
                variant: format!("{} - {}", self.meta.variant, other.meta.variant),
                level: self.meta.level.or(other.meta.level),
            },
            ..self.clone()
        })
    }

    /// Largest `|self − other|` over the grid.
    pub fn sup_distance(&self, other: &FieldSample) -> Result<f64> {
        let d = self.difference(other)?;
        Ok(d.values.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `<stem>.json` (everything but the values) and `<stem>.bin`
    /// (values as little-endian `f64`, time-major, point-minor).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        let head = with_ext(stem, "json");
        fs::write(&head, json).map_err(|e| Error::io(&head, e))?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let bin = with_ext(stem, "bin");
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let head = with_ext(stem, "json");
        let text = fs::read_to_string(&head).map_err(|e| Error::io(&head, e))?;
        let mut sample: FieldSample = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        let bin = with_ext(stem, "bin");
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        sample.values = decode_f64(&bytes)?;
        if sample.values.len() != sample.num_times() * sample.num_points() {
            return Err(Error::Serde(format!("{} has an unexpected length", bin.display())));
        }
        Ok(sample)
    }
}
