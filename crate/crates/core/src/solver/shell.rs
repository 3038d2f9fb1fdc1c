//! Sphere averages of interpolated lattice fields as sparse lattice kernels.
//!
//! For a point whose position inside its lattice cell is fixed, the nodes
//! `x + sξ_q` of the sphere rule fall at the same relative positions, so
//! `Σ_q c_q · interp(F)(x + sξ_q)` is a fixed weighted sum over lattice
//! offsets from the point's base cell. Merging the `8·N` trilinear corners
//! into one entry per lattice offset shrinks the work per evaluation to the
//! number of cells the sphere crosses.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use crate::noise::Lattice;
use crate::wavekernel::SphereQuadrature;

/// Lattice cell and in-cell position of a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Location {
    base: [i64; 3],
    frac: [f64; 3],
    key: [i64; 3],
}

const FRAC_QUANTUM: f64 = (1u64 << 32) as f64;

pub(crate) struct ShellKernel {
    offsets: Vec<[i64; 3]>,
    flat: Vec<isize>,
    weights: Vec<f64>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl ShellKernel {
    #[inline]
    fn apply(&self, lattice: &Lattice, field: &[f64], base: [i64; 3]) -> f64 {
        let dims = lattice.dims;
        let stride = [(dims[1] * dims[2]) as i64, dims[2] as i64, 1];
        let inside = (0..3).all(|a| base[a] + self.lo[a] >= 0 && base[a] + self.hi[a] < dims[a] as i64);
        if inside {
            let b = (base[0] * stride[0] + base[1] * stride[1] + base[2]) as isize;
            let mut total = 0.0;
            for (&o, &w) in self.flat.iter().zip(&self.weights) {
                total += w * field[(b + o) as usize];
            }
            return total;
        }
        // points beyond the box take the value of the nearest face
        let mut total = 0.0;
        for (o, &w) in self.offsets.iter().zip(&self.weights) {
            let mut idx = 0;
            for a in 0..3 {
                idx += (base[a] + o[a]).clamp(0, dims[a] as i64 - 1) * stride[a];
            }
            total += w * field[idx as usize];
        }
        total
    }
}

/// Lazily built kernels keyed by in-cell position and time lag.
pub(crate) struct ShellKernels<'a> {
    lattice: &'a Lattice,
    quad: &'a SphereQuadrature,
    dt: f64,
    cache: RefCell<HashMap<([i64; 3], usize), Rc<ShellKernel>>>,
}

impl<'a> ShellKernels<'a> {
    pub fn new(lattice: &'a Lattice, quad: &'a SphereQuadrature, dt: f64) -> Self {
        ShellKernels {
            lattice,
            quad,
            dt,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn locate(&self, p: [f64; 3]) -> Location {
        let l = self.lattice;
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        let mut key = [0i64; 3];
        for a in 0..3 {
            let u = (p[a] - l.origin[a]) / l.spacing;
            let mut cell = u.floor();
            let mut f = u - cell;
            // snap positions within rounding of a lattice plane onto it
            if 1.0 - f < 1e-12 {
                cell += 1.0;
                f = 0.0;
            } else if f < 1e-12 {
                f = 0.0;
            }
            base[a] = cell as i64;
            frac[a] = f;
            key[a] = (f * FRAC_QUANTUM).round() as i64;
        }
        Location { base, frac, key }
    }

    /// `Σ_q (s w_q / 4π) · interp(field)(x + sξ_q)` with `s = lag·Δt`.
    #[inline]
    pub fn convolve(&self, field: &[f64], at: &Location, lag: usize) -> f64 {
        let kernel = self.kernel(at, lag);
        kernel.apply(self.lattice, field, at.base)
    }

    fn kernel(&self, at: &Location, lag: usize) -> Rc<ShellKernel> {
        if let Some(k) = self.cache.borrow().get(&(at.key, lag)) {
            return Rc::clone(k);
        }
        let k = Rc::new(self.build(at.frac, lag));
        self.cache.borrow_mut().insert((at.key, lag), Rc::clone(&k));
        k
    }

    fn build(&self, frac: [f64; 3], lag: usize) -> ShellKernel {
        let s = lag as f64 * self.dt;
        let r = s / self.lattice.spacing;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            lo[a] = (frac[a] - r).floor() as i64 - 1;
            hi[a] = (frac[a] + r).floor() as i64 + 2;
        }
        let ext = [
            (hi[0] - lo[0] + 1) as usize,
            (hi[1] - lo[1] + 1) as usize,
            (hi[2] - lo[2] + 1) as usize,
        ];
        let mut dense = vec![0.0; ext[0] * ext[1] * ext[2]];
        for (n, w) in self.quad.nodes.iter().zip(&self.quad.weights) {
            let c = s * w / (4.0 * PI);
            let mut cell = [0i64; 3];
            let mut f = [0.0; 3];
            for a in 0..3 {
                let u = frac[a] + r * n[a];
                let fl = u.floor();
                cell[a] = fl as i64;
                f[a] = u - fl;
            }
            for corner in 0..8 {
                let bits = [(corner >> 2) & 1, (corner >> 1) & 1, corner & 1];
                let mut wt = c;
                let mut idx = 0usize;
                for a in 0..3 {
                    let off = cell[a] + bits[a] as i64;
                    wt *= if bits[a] == 1 { f[a] } else { 1.0 - f[a] };
                    idx = idx * ext[a] + (off - lo[a]) as usize;
                }
                dense[idx] += wt;
            }
        }
        let dims = self.lattice.dims;
        let stride = [(dims[1] * dims[2]) as i64, dims[2] as i64, 1];
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let (mut used_lo, mut used_hi) = ([i64::MAX; 3], [i64::MIN; 3]);
        for i in 0..ext[0] {
            for j in 0..ext[1] {
                for k in 0..ext[2] {
                    let w = dense[(i * ext[1] + j) * ext[2] + k];
                    if w != 0.0 {
                        let o = [lo[0] + i as i64, lo[1] + j as i64, lo[2] + k as i64];
                        for a in 0..3 {
                            used_lo[a] = used_lo[a].min(o[a]);
                            used_hi[a] = used_hi[a].max(o[a]);
                        }
                        offsets.push(o);
                        weights.push(w);
                    }
                }
            }
        }
        if offsets.is_empty() {
            used_lo = [0; 3];
            used_hi = [0; 3];
        }
        let flat = offsets
            .iter()
            .map(|o| (o[0] * stride[0] + o[1] * stride[1] + o[2] * stride[2]) as isize)
            .collect();
        ShellKernel {
            offsets,
            flat,
            weights,
            lo: used_lo,
            hi: used_hi,
        }
    }
}
