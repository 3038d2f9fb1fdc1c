use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Globally Lipschitz scalar coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant { value: f64 },
    /// `slope·u + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// `offset + amplitude·sin(frequency·u)`.
    Sine { offset: f64, amplitude: f64, frequency: f64 },
    /// `offset + amplitude·tanh(scale·u)`.
    Tanh { offset: f64, amplitude: f64, scale: f64 },
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::zero()
    }
}

impl Coefficient {
    pub const fn zero() -> Self {
        Coefficient::Constant { value: 0.0 }
    }

    pub const fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Coefficient::Constant { value } => value,
            Coefficient::Affine { slope, intercept } => slope * u + intercept,
            Coefficient::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * u).sin(),
            Coefficient::Tanh { offset, amplitude, scale } => offset + amplitude * (scale * u).tanh(),
        }
    }

    /// Declared global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::Affine { slope, .. } => slope.abs(),
            Coefficient::Sine {
                amplitude, frequency, ..
            } => (amplitude * frequency).abs(),
            Coefficient::Tanh { amplitude, scale, .. } => (amplitude * scale).abs(),
        }
    }

    /// True when the coefficient does not depend on its argument.
    pub fn is_constant(&self) -> bool {
        self.lipschitz() == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.is_constant() && self.eval(0.0) == 0.0
    }

    /// Checks `|F(x) − F(y)| ≤ L|x − y|` on random pairs in `[-range, range]`.
    pub fn verify_lipschitz(&self, probes: usize, range: f64, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = self.lipschitz();
        for _ in 0..probes {
            let x: f64 = rng.gen_range(-range..range);
            let y: f64 = rng.gen_range(-range..range);
            let lhs = (self.eval(x) - self.eval(y)).abs();
            if lhs > l * (x - y).abs() * (1.0 + 1e-12) + 1e-14 {
                return Err(Error::Parameter(format!(
                    "{self:?} violates its Lipschitz constant {l} at ({x}, {y})"
                )));
            }
        }
        Ok(())
    }
}

/// Signed sum of coefficients, e.g. `A + B` or `−A`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Combination {
    parts: Vec<(f64, Coefficient)>,
}

impl Combination {
    pub fn of(parts: &[(f64, Coefficient)]) -> Self {
        Combination {
            parts: parts.iter().copied().filter(|(s, c)| *s != 0.0 && !c.is_zero()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.parts.iter().all(|(_, c)| c.is_constant())
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.parts.iter().map(|(s, c)| s * c.eval(u)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_constants() {
        let s = Coefficient::Sine {
            offset: 1.0,
            amplitude: 0.5,
            frequency: 1.0,
        };
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.lipschitz(), 0.5);
        assert!(Coefficient::zero().is_zero());
        assert!(Coefficient::constant(2.0).is_constant());
        assert!(!Coefficient::constant(2.0).is_zero());
    }

    #[test]
    fn declared_constants_hold() {
        let cs = [
            Coefficient::Affine { slope: -0.7, intercept: 2.0 },
            Coefficient::Sine { offset: 1.0, amplitude: 0.5, frequency: 1.0 },
            Coefficient::Tanh { offset: 0.0, amplitude: 2.0, scale: 0.3 },
            Coefficient::constant(4.0),
        ];
        for c in cs {
            c.verify_lipschitz(10_000, 10.0, 1).unwrap();
        }
        let lying = Coefficient::Sine { offset: 0.0, amplitude: 1.0, frequency: 3.0 };
        // a coefficient claiming a smaller constant than it has must be caught
        let wrong = Combination::of(&[(1.0, lying)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut violated = false;
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = x + 1e-3;
            violated |= (wrong.eval(x) - wrong.eval(y)).abs() > 1.0 * (x - y).abs();
        }
        assert!(violated);
    }

    #[test]
    fn combination_drops_zero_terms() {
        let c = Combination::of(&[(1.0, Coefficient::zero()), (0.0, Coefficient::constant(3.0))]);
        assert!(c.is_zero());
        let d = Combination::of(&[(1.0, Coefficient::constant(1.0)), (-1.0, Coefficient::Affine { slope: 2.0, intercept: 0.0 })]);
        assert_eq!(d.eval(1.0), -1.0);
        assert!(!d.is_constant());
    }
}
