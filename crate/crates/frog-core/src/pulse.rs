//! Complex pulses with periodic (mod-N) indexing.

use crate::error::{FrogError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A length-N complex signal, periodic in its index: `x[n] == x[n + N]`.
///
/// All operations in this crate treat index arithmetic modulo N. The minimum
/// supported length is 4, below which undersampled acquisition regimes are
/// meaningless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    samples: Vec<Complex64>,
}

impl Pulse {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < 4 {
            return Err(FrogError::PulseTooShort { n: samples.len() });
        }
        Ok(Pulse { samples })
    }

    /// All-zero pulse of length `n`.
    pub fn zeros(n: usize) -> Result<Self> {
        Pulse::new(vec![Complex64::default(); n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Sample at a wrapped index; `shift` may exceed N.
    #[inline]
    pub fn at(&self, index: usize) -> Complex64 {
        self.samples[index % self.samples.len()]
    }

    /// `sum |x[n]|^2`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| s.norm_sqr() == 0.0)
    }

    /// True when every sample is finite.
    pub fn is_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

/// The trace-preserving transforms: any pulse maps to another pulse with an
/// identical FROG trace under each of these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambiguity {
    /// Global phase: `x -> e^{i phi} x`.
    Rotation(f64),
    /// Circular translation by `shift` samples: `y[n] = x[n - shift]`.
    Shift(isize),
    /// Conjugate reflection: `y[n] = conj(x[-n])`.
    Reflection,
}

/// Applies one of the trivial ambiguities to a pulse.
pub fn apply_ambiguity(x: &Pulse, kind: Ambiguity) -> Pulse {
    let n = x.len() as isize;
    let samples = match kind {
        Ambiguity::Rotation(phi) => {
            let rot = Complex64::from_polar(1.0, phi);
            x.samples().iter().map(|s| s * rot).collect()
        }
        Ambiguity::Shift(shift) => (0..n)
            .map(|i| {
                let src = (i - shift).rem_euclid(n) as usize;
                x.samples()[src]
            })
            .collect(),
        Ambiguity::Reflection => (0..n)
            .map(|i| {
                let src = (-i).rem_euclid(n) as usize;
                x.samples()[src].conj()
            })
            .collect(),
    };
    Pulse { samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> Pulse {
        Pulse::new(vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.2, 0.8),
            Complex64::new(0.0, -1.1),
            Complex64::new(0.7, 0.0),
            Complex64::new(-0.4, -0.3),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_short_pulses() {
        assert!(matches!(
            Pulse::new(vec![Complex64::default(); 3]),
            Err(FrogError::PulseTooShort { n: 3 })
        ));
    }

    #[test]
    fn shift_zero_is_identity() {
        let x = probe();
        assert_eq!(apply_ambiguity(&x, Ambiguity::Shift(0)), x);
    }

    #[test]
    fn shift_wraps_negative() {
        let x = probe();
        let left = apply_ambiguity(&x, Ambiguity::Shift(-1));
        for i in 0..x.len() {
            assert_eq!(left.samples()[i], x.at(i + 1));
        }
    }

    #[test]
    fn reflection_is_involution() {
        let x = probe();
        let twice = apply_ambiguity(&apply_ambiguity(&x, Ambiguity::Reflection), Ambiguity::Reflection);
        for (a, b) in twice.samples().iter().zip(x.samples()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn rotation_preserves_energy() {
        let x = probe();
        let rot = apply_ambiguity(&x, Ambiguity::Rotation(1.234));
        assert!((rot.energy() - x.energy()).abs() < 1e-12);
    }
}
