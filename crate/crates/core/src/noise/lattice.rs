use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular Cartesian lattice of spatial sample sites.
///
/// Sites are stored x-major: index `(i·ny + j)·nz + k` for site
/// `origin + spacing·(i, j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

/// Trilinear interpolation stencil: eight site indices and weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub sites: [u32; 8],
    pub weights: [f64; 8],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, field: &[f64]) -> f64 {
        let mut v = 0.0;
        for c in 0..8 {
            v += self.weights[c] * field[self.sites[c] as usize];
        }
        v
    }
}

impl Lattice {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Parameter(format!("lattice spacing must be positive, got {spacing}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Parameter("lattice dimensions must be nonzero".into()));
        }
        if dims.iter().product::<usize>() > u32::MAX as usize {
            return Err(Error::Parameter("lattice too large".into()));
        }
        Ok(Lattice { origin, spacing, dims })
    }

    /// `points` sites per axis spanning `[center - half_width, center + half_width]³`.
    pub fn cube(center: [f64; 3], half_width: f64, points: usize) -> Result<Self> {
        if points == 1 {
            return Lattice::new(center, half_width.max(1.0), [1, 1, 1]);
        }
        if points == 0 || !(half_width > 0.0) {
            return Err(Error::Parameter(format!(
                "cube lattice needs points ≥ 1 and half_width > 0, got {points} and {half_width}"
            )));
        }
        let spacing = 2.0 * half_width / (points - 1) as f64;
        let origin = [center[0] - half_width, center[1] - half_width, center[2] - half_width];
        Lattice::new(origin, spacing, [points; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn site(&self, idx: usize) -> [f64; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        ]
    }

    pub fn sites(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.site(i)).collect()
    }

    pub fn lower(&self) -> [f64; 3] {
        self.origin
    }

    pub fn upper(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + self.spacing * (self.dims[a] - 1) as f64)
    }

    pub fn center(&self) -> [f64; 3] {
        let (lo, hi) = (self.lower(), self.upper());
        std::array::from_fn(|a| 0.5 * (lo[a] + hi[a]))
    }

    /// Whether `p` lies in the closed bounding box, up to `tol`.
    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (0..3).all(|a| p[a] >= lo[a] - tol && p[a] <= hi[a] + tol)
    }

    /// Index of the site at `p`, if `p` coincides with one (to `1e-9` spacing).
    pub fn site_at(&self, p: [f64; 3]) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.spacing;
            let r = u.round();
            if (u - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.dims[a] {
                return None;
            }
            ijk[a] = r as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }

    /// Trilinear stencil at `p`; points outside the box are clamped onto it.
    #[inline]
    pub fn stencil(&self, p: [f64; 3]) -> Stencil {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut step = [0usize; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let u = ((p[a] - self.origin[a]) / self.spacing).clamp(0.0, (n - 1) as f64);
            let cell = (u.floor() as usize).min(n - 2);
            base[a] = cell;
            frac[a] = u - cell as f64;
            step[a] = 1;
        }
        let stride = [self.dims[1] * self.dims[2], self.dims[2], 1];
        let b = base[0] * stride[0] + base[1] * stride[1] + base[2];
        let mut sites = [0u32; 8];
        let mut weights = [0.0; 8];
        for c in 0..8 {
            let bits = [(c >> 2) & 1, (c >> 1) & 1, c & 1];
            let mut idx = b;
            let mut w = 1.0;
            for a in 0..3 {
                if bits[a] == 1 {
                    idx += step[a] * stride[a];
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            sites[c] = idx as u32;
            weights[c] = w;
        }
        Stencil { sites, weights }
    }

    /// Trilinear interpolation of a lattice field at `p`.
    pub fn interpolate(&self, field: &[f64], p: [f64; 3]) -> f64 {
        self.stencil(p).apply(field)
    }
}

/// Axis-aligned box `[lo, hi]`; a single point when `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Region {
    pub fn point(p: [f64; 3]) -> Self {
        Region { lo: p, hi: p }
    }

    pub fn cube(center: [f64; 3], half_width: f64) -> Self {
        Region {
            lo: std::array::from_fn(|a| center[a] - half_width),
            hi: std::array::from_fn(|a| center[a] + half_width),
        }
    }

    /// Euclidean distance from `p` to the box.
    pub fn distance(&self, p: [f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let e = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
            d2 += e * e;
        }
        d2.sqrt()
    }

    /// `points` per axis, evenly spaced and including the corners.
    pub fn grid(&self, points: usize) -> Vec<[f64; 3]> {
        let axis = |a: usize| -> Vec<f64> {
            if points <= 1 || self.hi[a] == self.lo[a] {
                return vec![0.5 * (self.lo[a] + self.hi[a])];
            }
            (0..points)
                .map(|i| self.lo[a] + (self.hi[a] - self.lo[a]) * i as f64 / (points - 1) as f64)
                .collect()
        };
        let (xs, ys, zs) = (axis(0), axis(1), axis(2));
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }
}

/// Time discretization plus spatial lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub horizon: f64,
    pub num_steps: usize,
    pub lattice: Lattice,
}

impl NoiseGrid {
    pub fn new(horizon: f64, num_steps: usize, lattice: Lattice) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        if num_steps == 0 {
            return Err(Error::Parameter("num_steps must be at least 1".into()));
        }
        Ok(NoiseGrid {
            horizon,
            num_steps,
            lattice,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.num_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.num_steps as f64
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.len()
    }

    /// Checks that the lattice box contains every point within distance
    /// `reach` of `region` (the domain of dependence when `reach = T`).
    pub fn check_coverage(&self, region: &Region, reach: f64) -> Result<()> {
        let (lo, hi) = (self.lattice.lower(), self.lattice.upper());
        let tol = 1e-9 * self.lattice.spacing;
        for a in 0..3 {
            if region.lo[a] - reach < lo[a] - tol || region.hi[a] + reach > hi[a] + tol {
                return Err(Error::Parameter(format!(
                    "lattice [{:?}, {:?}] does not cover the region {:?} widened by {reach}",
                    lo, hi, region
                )));
            }
        }
        Ok(())
    }

    /// Number of time steps per level-`n` dyadic interval.
    pub fn steps_per_dyadic(&self, n: u32) -> Result<usize> {
        let parts = 1usize
            .checked_shl(n)
            .filter(|&p| p > 0)
            .ok_or_else(|| Error::Alignment(format!("level {n} too large")))?;
        if self.num_steps % parts != 0 {
            return Err(Error::Alignment(format!(
                "num_steps = {} is not a multiple of 2^{n} = {parts}",
                self.num_steps
            )));
        }
        Ok(self.num_steps / parts)
    }
}
