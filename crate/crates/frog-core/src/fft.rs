//! DFT conventions and helpers used throughout the crate.
//!
//! Every transform in this crate follows one pinned convention:
//!
//! - forward DFT:  `X[k] = sum_n x[n] * exp(-2*pi*i*n*k/N)` (no prefactor),
//! - inverse DFT:  `x[n] = (1/N) * sum_k X[k] * exp(+2*pi*i*k*n/N)`.
//!
//! [`dft`] and [`idft_unnormalized`] map directly onto rustfft's forward and
//! inverse kernels; [`idft`] applies the `1/N` factor. Direct per-term phase
//! factors come from a precomputed [`Twiddle`] table so that scalar loops and
//! FFT paths agree to machine precision on the same root-of-unity values.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT, in place: `x[k] <- sum_n x[n] e^{-2pi i nk/N}`.
pub fn dft_inplace(x: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(x.len());
        fft.process(x);
    });
}

/// Unnormalized inverse DFT, in place: `x[n] <- sum_k x[k] e^{+2pi i kn/N}`.
pub fn idft_unnormalized_inplace(x: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(x.len());
        fft.process(x);
    });
}

/// Forward DFT of a slice.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    dft_inplace(&mut out);
    out
}

/// Unnormalized inverse DFT of a slice.
pub fn idft_unnormalized(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    idft_unnormalized_inplace(&mut out);
    out
}

/// Normalized inverse DFT (`1/N` prefactor); exact inverse of [`dft`].
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut out = idft_unnormalized(x);
    let scale = 1.0 / n as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// Precomputed table of the N-th roots of unity.
///
/// `tw[j] = exp(+2*pi*i*j/N)`; exponents are reduced modulo N, so
/// `Twiddle::pos(j)` and `Twiddle::neg(j)` give `e^{+2pi i j/N}` and
/// `e^{-2pi i j/N}` for any j.
#[derive(Debug, Clone)]
pub struct Twiddle {
    n: usize,
    roots: Vec<Complex64>,
}

impl Twiddle {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let roots = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        Twiddle { n, roots }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `exp(+2*pi*i*j/N)`.
    #[inline]
    pub fn pos(&self, j: usize) -> Complex64 {
        self.roots[j % self.n]
    }

    /// `exp(-2*pi*i*j/N)`.
    #[inline]
    pub fn neg(&self, j: usize) -> Complex64 {
        self.roots[(self.n - j % self.n) % self.n]
    }
}
