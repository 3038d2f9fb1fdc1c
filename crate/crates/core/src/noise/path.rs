use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::covariance::{DiagonalRule, LatticeCovariance, ModeBasis};
use super::lattice::NoiseGrid;
use crate::error::{Error, Result};
use crate::kernels::CovarianceSpec;

/// One realization of the lattice noise increments over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: NoiseGrid,
    /// `num_steps × num_sites`, time-major: `ΔM(t_k, y_a)`.
    pub increments: Vec<f64>,
    /// Leading eigenmodes of the lattice covariance, shared across paths.
    pub basis: Option<Arc<ModeBasis>>,
    /// `num_modes × num_steps`, mode-major: `W_j([t_k, t_{k+1}))`.
    pub mode_increments: Vec<f64>,
    pub seed: u64,
}

impl NoisePath {
    pub fn num_modes(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.num_modes())
    }

    pub fn step(&self, k: usize) -> &[f64] {
        let n = self.grid.num_sites();
        &self.increments[k * n..(k + 1) * n]
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        let s = self.grid.num_steps;
        &self.mode_increments[j * s..(j + 1) * s]
    }

    /// A path with every increment zero, sharing `basis`.
    pub fn zeros(grid: NoiseGrid, basis: Option<Arc<ModeBasis>>) -> Self {
        let modes = basis.as_ref().map_or(0, |b| b.num_modes());
        NoisePath {
            increments: vec![0.0; grid.num_steps * grid.num_sites()],
            mode_increments: vec![0.0; modes * grid.num_steps],
            grid,
            basis,
            seed: 0,
        }
    }

    /// Recomputes `mode_increments` from `increments`.
    pub fn refresh_modes(&mut self) {
        let Some(basis) = &self.basis else {
            self.mode_increments.clear();
            return;
        };
        let steps = self.grid.num_steps;
        let mut modes = vec![0.0; basis.num_modes() * steps];
        for k in 0..steps {
            for (j, w) in basis.project(self.step(k)).into_iter().enumerate() {
                modes[j * steps + k] = w;
            }
        }
        self.mode_increments = modes;
    }

    /// Persists the path as `<stem>.json` (header) and `<stem>.bin`
    /// (little-endian `f64`: increments, eigenvalues, eigenvectors, mode
    /// increments, in that order).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let header = PathHeader {
            format: PATH_FORMAT.into(),
            version: 1,
            grid: self.grid.clone(),
            seed: self.seed,
            num_modes: self.num_modes(),
            num_sites: self.grid.num_sites(),
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Serde(e.to_string()))?;
        let head = with_ext(stem, "json");
        fs::write(&head, json).map_err(|e| Error::io(&head, e))?;
        let mut bytes = Vec::new();
        let empty = Vec::new();
        let (vals, vecs) = match &self.basis {
            Some(b) => (&b.eigenvalues, &b.vectors),
            None => (&empty, &empty),
        };
        for chunk in [&self.increments, vals, vecs, &self.mode_increments] {
            bytes.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
        }
        let bin = with_ext(stem, "bin");
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let head = with_ext(stem, "json");
        let text = fs::read_to_string(&head).map_err(|e| Error::io(&head, e))?;
        let header: PathHeader = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        if header.format != PATH_FORMAT || header.version != 1 {
            return Err(Error::Serde(format!(
                "unsupported noise file {} v{}",
                header.format, header.version
            )));
        }
        let bin = with_ext(stem, "bin");
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        let values = decode_f64(&bytes)?;
        let (steps, sites, modes) = (header.grid.num_steps, header.num_sites, header.num_modes);
        let lens = [steps * sites, modes, modes * sites, modes * steps];
        if values.len() != lens.iter().sum::<usize>() || sites != header.grid.num_sites() {
            return Err(Error::Serde(format!("{} has an unexpected length", bin.display())));
        }
        let mut rest = values.as_slice();
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a.to_vec()
        };
        let increments = take(lens[0]);
        let eigenvalues = take(lens[1]);
        let vectors = take(lens[2]);
        let mode_increments = take(lens[3]);
        let basis = (modes > 0).then(|| {
            Arc::new(ModeBasis {
                eigenvalues,
                vectors,
                num_sites: sites,
            })
        });
        Ok(NoisePath {
            grid: header.grid,
            increments,
            basis,
            mode_increments,
            seed: header.seed,
        })
    }
}

const PATH_FORMAT: &str = "stochwave-noise-path";

#[derive(Debug, Serialize, Deserialize)]
struct PathHeader {
    format: String,
    version: u32,
    grid: NoiseGrid,
    seed: u64,
    num_modes: usize,
    num_sites: usize,
}

pub(crate) fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

pub(crate) fn decode_f64(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Serde("binary payload is not a whole number of f64 values".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Factorized lattice covariance ready to draw many paths.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    pub grid: NoiseGrid,
    pub covariance: Arc<LatticeCovariance>,
    basis: Option<Arc<ModeBasis>>,
}

impl NoiseSampler {
    pub fn new(
        spec: &CovarianceSpec,
        grid: &NoiseGrid,
        num_modes: usize,
        diagonal: DiagonalRule,
    ) -> Result<Self> {
        let covariance = LatticeCovariance::new(spec, &grid.lattice, diagonal, num_modes)?;
        let basis = covariance.basis.clone().map(Arc::new);
        Ok(NoiseSampler {
            grid: grid.clone(),
            covariance: Arc::new(covariance),
            basis,
        })
    }

    pub fn basis(&self) -> Option<&Arc<ModeBasis>> {
        self.basis.as_ref()
    }

    /// Draws `ΔM(t_k) = √Δt · L z_k` with `z_k` standard normal, using a
    /// ChaCha8 stream seeded by `seed`.
    pub fn sample(&self, seed: u64) -> NoisePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.grid.num_sites();
        let steps = self.grid.num_steps;
        let scale = self.grid.dt().sqrt();
        // column k holds the standard normals of step k
        let normals: Vec<f64> = (0..n * steps).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = DMatrix::from_vec(n, steps, normals);
        let increments = self.covariance.correlate_columns(&z, scale).as_slice().to_vec();
        let mut path = NoisePath {
            grid: self.grid.clone(),
            increments,
            basis: self.basis.clone(),
            mode_increments: Vec::new(),
            seed,
        };
        path.refresh_modes();
        path
    }
}

/// Samples one path with the regularized diagonal `Σ_aa = f(reg_radius)`.
pub fn sample_noise(spec: &CovarianceSpec, grid: &NoiseGrid, num_modes: usize, seed: u64) -> Result<NoisePath> {
    Ok(NoiseSampler::new(spec, grid, num_modes, DiagonalRule::Regularized)?.sample(seed))
}
