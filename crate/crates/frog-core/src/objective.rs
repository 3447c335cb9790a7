//! Smoothed amplitude least-squares objective and its Wirtinger gradient.
//!
//! With `a_{k,p}(z) = sum_n z[n] z[n+pL] e^{-2pi i nk/N}` and
//! `b[p,k] = sqrt(Z[p,k])`, the loss is
//!
//! ```text
//! h(z, mu) = (1/(NR)) sum_{k,p} [ phi_mu(|a_{k,p}(z)|) - b[p,k] ]^2 ,
//! phi_mu(w) = sqrt(w^2 + mu^2).
//! ```
//!
//! The gradient with respect to `conj(z[l])` follows from the chain rule
//! through `phi_mu` and `|.|`; since `a_{k,p}` is holomorphic in `z`,
//!
//! ```text
//! d a_{k,p} / d z[l] = z[l+pL] e^{-2pi i lk/N} + z[l-pL] e^{-2pi i (l-pL)k/N},
//! d h / d conj(z[l]) = (1/(NR)) sum_{k,p} (a_{k,p} - v_{k,p})
//!                      * ( conj(z[l+pL]) + conj(z[l-pL]) e^{-2pi i k pL/N} )
//!                      * e^{+2pi i lk/N},
//! v_{k,p} = b[p,k] * a_{k,p} / phi_mu(|a_{k,p}|).
//! ```
//!
//! Note the `pL` (not `p`) shifts and phase: the derivation is certified by
//! the finite-difference tests, which arbitrate the formula. The block
//! stochastic direction `d_Gamma` is the *unnormalized* partial sum of the
//! same per-term contributions over a random index subset, so
//! `E[d_Gamma] = Q * full_gradient` for blocks of cardinality Q.
//!
//! All summations run in a fixed (p-major, k-minor) order, so results are
//! reproducible bit-for-bit.

use crate::error::{FrogError, Result};
use crate::fft::{self, Twiddle};
use crate::pulse::Pulse;
use crate::trace::FrogTrace;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

/// `sqrt(w^2 + mu^2)`, the smooth surrogate for `|w|`.
#[inline]
pub fn phi_mu(w: f64, mu: f64) -> f64 {
    w.hypot(mu)
}

/// Euclidean norm of a complex vector.
pub fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// A random subset of (frequency, delay) index pairs, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndexSet {
    /// Pairs `(k, p)`, sorted p-major then k.
    pairs: Vec<(usize, usize)>,
}

impl BlockIndexSet {
    /// The full index set `{0..N-1} x {0..R-1}` in canonical order.
    pub fn full(n: usize, r: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * r);
        for p in 0..r {
            for k in 0..n {
                pairs.push((k, p));
            }
        }
        BlockIndexSet { pairs }
    }

    /// Builds from explicit pairs; rejects duplicates and out-of-range indices.
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>, n: usize, r: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(FrogError::InvalidParameter {
                what: "block index set must not be empty".into(),
            });
        }
        for &(k, p) in &pairs {
            if k >= n || p >= r {
                return Err(FrogError::InvalidParameter {
                    what: format!("index pair (k={k}, p={p}) out of range for N={n}, R={r}"),
                });
            }
        }
        pairs.sort_unstable_by_key(|&(k, p)| (p, k));
        if pairs.windows(2).any(|w| w[0] == w[1]) {
            return Err(FrogError::InvalidParameter {
                what: "block index set contains duplicate pairs".into(),
            });
        }
        Ok(BlockIndexSet { pairs })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    #[inline]
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Uniform sample of `q` distinct `(k, p)` pairs from `{0..n-1} x {0..r-1}`.
pub fn sample_block<R: Rng>(n: usize, r: usize, q: usize, rng: &mut R) -> Result<BlockIndexSet> {
    let total = n * r;
    if q == 0 || q > total {
        return Err(FrogError::InvalidParameter {
            what: format!("block cardinality Q={q} out of range 1..={total}"),
        });
    }
    let mut pairs: Vec<(usize, usize)> = rand::seq::index::sample(rng, total, q)
        .into_iter()
        .map(|flat| (flat % n, flat / n))
        .collect();
    pairs.sort_unstable_by_key(|&(k, p)| (p, k));
    Ok(BlockIndexSet { pairs })
}

/// Square-rooted trace data prepared for repeated loss/gradient evaluation.
#[derive(Debug, Clone)]
pub struct AmplitudeTarget {
    b: Array2<f64>,
    n: usize,
    r: usize,
    stride: usize,
    twiddle: Twiddle,
}

impl AmplitudeTarget {
    pub fn from_trace(z: &FrogTrace) -> Self {
        AmplitudeTarget {
            b: z.values().mapv(f64::sqrt),
            n: z.n(),
            r: z.delays(),
            stride: z.stride(),
            twiddle: Twiddle::new(z.n()),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn delays(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Total number of (k, p) terms, `N * R`.
    #[inline]
    pub fn term_count(&self) -> usize {
        self.n * self.r
    }

    fn check_len(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.n {
            return Err(FrogError::DimensionMismatch {
                what: format!("iterate length {} vs trace N {}", z.len(), self.n),
            });
        }
        Ok(())
    }

    /// DFT of the delay-p product row `g_p[n] = z[n] z[n+pL]`.
    fn product_spectrum(&self, z: &[Complex64], p: usize, buf: &mut [Complex64]) {
        let n = self.n;
        let shift = p * self.stride;
        for i in 0..n {
            buf[i] = z[i] * z[(i + shift) % n];
        }
        fft::dft_inplace(buf);
    }

    /// `h(z, mu)`; `mu = 0` gives the raw (non-smooth) amplitude loss.
    pub fn loss(&self, z: &[Complex64], mu: f64) -> Result<f64> {
        self.check_len(z)?;
        if mu < 0.0 {
            return Err(FrogError::InvalidParameter {
                what: format!("mu must be >= 0, got {mu}"),
            });
        }
        let mut row = vec![Complex64::default(); self.n];
        let mut acc = 0.0;
        for p in 0..self.r {
            self.product_spectrum(z, p, &mut row);
            for k in 0..self.n {
                let d = phi_mu(row[k].norm(), mu) - self.b[(p, k)];
                acc += d * d;
            }
        }
        Ok(acc / (self.n * self.r) as f64)
    }

    /// Sum of per-term gradient contributions over `block`, unnormalized.
    ///
    /// Pairs are consumed in canonical order; each distinct delay's product
    /// spectrum is computed once.
    pub fn block_gradient(
        &self,
        z: &[Complex64],
        mu: f64,
        block: &BlockIndexSet,
    ) -> Result<Vec<Complex64>> {
        self.check_len(z)?;
        if !(mu > 0.0) {
            return Err(FrogError::ZeroSmoothing);
        }
        for &(k, p) in block.pairs() {
            if k >= self.n || p >= self.r {
                return Err(FrogError::InvalidParameter {
                    what: format!("block pair (k={k}, p={p}) out of range"),
                });
            }
        }
        let n = self.n;
        let tw = &self.twiddle;
        let mut grad = vec![Complex64::default(); n];
        let mut row = vec![Complex64::default(); n];
        let mut current_p = usize::MAX;
        for &(k, p) in block.pairs() {
            if p != current_p {
                self.product_spectrum(z, p, &mut row);
                current_p = p;
            }
            let shift = p * self.stride;
            let a = row[k];
            let v = a * (self.b[(p, k)] / phi_mu(a.norm(), mu));
            let s = a - v;
            let back_phase = tw.neg(k * shift);
            for l in 0..n {
                let q = z[(l + shift) % n].conj()
                    + z[(l + n - shift % n) % n].conj() * back_phase;
                grad[l] += s * q * tw.pos(l * k);
            }
        }
        Ok(grad)
    }

    /// `d h / d conj(z)`: the mean of all per-term contributions.
    pub fn full_gradient(&self, z: &[Complex64], mu: f64) -> Result<Vec<Complex64>> {
        let mut grad = self.block_gradient(z, mu, &BlockIndexSet::full(self.n, self.r))?;
        let scale = 1.0 / self.term_count() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok(grad)
    }
}

/// `h(z, mu)` against the trace `z_data`.
pub fn loss(z: &Pulse, z_data: &FrogTrace, mu: f64) -> Result<f64> {
    AmplitudeTarget::from_trace(z_data).loss(z.samples(), mu)
}

/// Full Wirtinger gradient of the smoothed loss at `z`.
pub fn full_gradient(z: &Pulse, z_data: &FrogTrace, mu: f64) -> Result<Vec<Complex64>> {
    AmplitudeTarget::from_trace(z_data).full_gradient(z.samples(), mu)
}

/// Unnormalized block stochastic gradient over the pairs in `block`.
pub fn block_gradient(
    z: &Pulse,
    z_data: &FrogTrace,
    mu: f64,
    block: &BlockIndexSet,
) -> Result<Vec<Complex64>> {
    AmplitudeTarget::from_trace(z_data).block_gradient(z.samples(), mu, block)
}
