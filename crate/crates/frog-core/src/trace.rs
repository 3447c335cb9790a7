//! The SHG-FROG forward model and the ambiguity-invariant error metric.
//!
//! A trace is the R x N nonnegative matrix
//!
//! ```text
//! Z[p,k] = | sum_n x[n] x[n+pL] e^{-2pi i nk/N} |^2 ,   p = 0..R-1, k = 0..N-1,
//! ```
//!
//! with delay stride `L` and `R = ceil(N/L)`. The transformed-domain view
//! applies a forward DFT over the frequency axis, scaled by `1/N`:
//!
//! ```text
//! Y[p,l] = (1/N) sum_k Z[p,k] e^{-2pi i kl/N}
//!        = sum_n x[n] conj(x[n+l]) x[n+pL] conj(x[n+l+pL]) ,
//! ```
//!
//! i.e. row p of Y is the autocorrelation of `x .* x_{pL}`.

use crate::error::{FrogError, Result};
use crate::fft;
use crate::pulse::Pulse;
use ndarray::Array2;
use num_complex::Complex64;

/// Number of recorded delays for grid size `n` and stride `l`.
#[inline]
pub fn delay_count(n: usize, stride: usize) -> usize {
    n.div_ceil(stride)
}

/// An R x N intensity trace with delay stride L.
///
/// Entries are clipped to be nonnegative on construction; externally loaded
/// data may carry noise-induced negative values and the square root of the
/// trace must stay real.
#[derive(Debug, Clone, PartialEq)]
pub struct FrogTrace {
    values: Array2<f64>,
    stride: usize,
    n: usize,
}

impl FrogTrace {
    /// Wraps raw values; `values` must be `ceil(N/L) x N`. Negative entries
    /// are clipped to zero.
    pub fn new(mut values: Array2<f64>, stride: usize, n: usize) -> Result<Self> {
        if stride == 0 || stride >= n {
            return Err(FrogError::InvalidStride { stride, n });
        }
        let r = delay_count(n, stride);
        if values.nrows() != r || values.ncols() != n {
            return Err(FrogError::DimensionMismatch {
                what: format!(
                    "trace must be {}x{} for N={}, L={}, got {}x{}",
                    r,
                    n,
                    n,
                    stride,
                    values.nrows(),
                    values.ncols()
                ),
            });
        }
        values.mapv_inplace(|v| v.max(0.0));
        Ok(FrogTrace { values, stride, n })
    }

    #[inline]
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of delay rows, `ceil(N/L)`.
    #[inline]
    pub fn delays(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Frobenius norm of the trace itself.
    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Synthesizes the FROG trace of `x` at delay stride `stride`.
///
/// Rows are computed with one forward FFT per delay; the result matches the
/// direct double-sum definition to machine precision.
pub fn synthesize_trace(x: &Pulse, stride: usize) -> Result<FrogTrace> {
    let n = x.len();
    if stride == 0 || stride >= n {
        return Err(FrogError::InvalidStride { stride, n });
    }
    let r = delay_count(n, stride);
    let mut values = Array2::zeros((r, n));
    let mut row = vec![Complex64::default(); n];
    for p in 0..r {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = x.at(i) * x.at(i + p * stride);
        }
        fft::dft_inplace(&mut row);
        for (k, slot) in row.iter().enumerate() {
            values[(p, k)] = slot.norm_sqr();
        }
    }
    FrogTrace::new(values, stride, n)
}

/// Entrywise square root of a trace, cached for repeated distance queries.
///
/// The relative error between two pulses is the Frobenius distance of the
/// square-rooted traces, normalized by the reference; it is invariant to all
/// trivial ambiguities.
#[derive(Debug, Clone)]
pub struct SqrtTrace {
    sqrt_values: Array2<f64>,
    norm: f64,
    stride: usize,
    n: usize,
}

impl SqrtTrace {
    pub fn of(x: &Pulse, stride: usize) -> Result<Self> {
        if x.is_zero() {
            return Err(FrogError::ZeroSignal {
                what: "reference pulse of trace_distance",
            });
        }
        Ok(Self::from_trace(&synthesize_trace(x, stride)?))
    }

    pub fn from_trace(z: &FrogTrace) -> Self {
        let sqrt_values = z.values().mapv(f64::sqrt);
        let norm = sqrt_values.iter().map(|v| v * v).sum::<f64>().sqrt();
        SqrtTrace {
            sqrt_values,
            norm,
            stride: z.stride(),
            n: z.n(),
        }
    }

    #[inline]
    pub fn values(&self) -> &Array2<f64> {
        &self.sqrt_values
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `|| sqrt(Z) - sqrt(W) ||_F / || sqrt(Z) ||_F` with W the trace of `w`.
    pub fn distance_to(&self, w: &Pulse) -> Result<f64> {
        if w.len() != self.n {
            return Err(FrogError::DimensionMismatch {
                what: format!("pulse length {} vs trace N {}", w.len(), self.n),
            });
        }
        let wt = synthesize_trace(w, self.stride)?;
        let mut acc = 0.0;
        for (a, b) in self.sqrt_values.iter().zip(wt.values().iter()) {
            let d = a - b.sqrt();
            acc += d * d;
        }
        Ok(acc.sqrt() / self.norm)
    }
}

/// Relative error between `x` and `w`, invariant to the trivial ambiguities.
pub fn trace_distance(x: &Pulse, w: &Pulse, stride: usize) -> Result<f64> {
    SqrtTrace::of(x, stride)?.distance_to(w)
}

/// The per-delay autocorrelation view of a trace.
#[derive(Debug, Clone)]
pub struct TransformedTrace {
    values: Array2<Complex64>,
    stride: usize,
    n: usize,
}

impl TransformedTrace {
    #[inline]
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn delays(&self) -> usize {
        self.values.nrows()
    }

    /// The length-R sequence over delays at a fixed lag, `y_l[p] = Y[p,l]`.
    pub fn lag_sequence(&self, lag: usize) -> Vec<Complex64> {
        self.values.column(lag).to_vec()
    }
}

/// `Y[p,l] = (1/N) sum_k Z[p,k] e^{-2pi i kl/N}`, one forward DFT per row.
pub fn transform_trace(z: &FrogTrace) -> TransformedTrace {
    let n = z.n();
    let r = z.delays();
    let mut values = Array2::default((r, n));
    let mut row = vec![Complex64::default(); n];
    let scale = 1.0 / n as f64;
    for p in 0..r {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = Complex64::new(z.values()[(p, k)], 0.0);
        }
        fft::dft_inplace(&mut row);
        for (l, slot) in row.iter().enumerate() {
            values[(p, l)] = slot * scale;
        }
    }
    TransformedTrace {
        values,
        stride: z.stride(),
        n,
    }
}

/// Inverse of [`transform_trace`]: reconstitutes an intensity trace from a
/// (possibly interpolated) transformed-domain matrix.
///
/// Entries are `| sum_l Y[p,l] e^{+2pi i kl/N} |`; the magnitude guards
/// against small negative or complex residues introduced by interpolation.
pub fn reconstitute_trace(y: &Array2<Complex64>, stride: usize, n: usize) -> Result<FrogTrace> {
    let r = y.nrows();
    if y.ncols() != n {
        return Err(FrogError::DimensionMismatch {
            what: format!("transformed trace has {} columns, expected {}", y.ncols(), n),
        });
    }
    let mut values = Array2::zeros((r, n));
    let mut row = vec![Complex64::default(); n];
    for p in 0..r {
        row.copy_from_slice(y.row(p).to_slice().expect("row-major layout"));
        fft::idft_unnormalized_inplace(&mut row);
        for (k, slot) in row.iter().enumerate() {
            values[(p, k)] = slot.norm();
        }
    }
    FrogTrace::new(values, stride, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{apply_ambiguity, Ambiguity};

    fn seeded(n: usize) -> Pulse {
        // deterministic, irrational-step samples; enough for convention checks
        let samples = (0..n)
            .map(|i| {
                Complex64::new(
                    (1.7 * i as f64 + 0.3).sin(),
                    (0.9 * i as f64 - 1.1).cos() * 0.6,
                )
            })
            .collect();
        Pulse::new(samples).unwrap()
    }

    #[test]
    fn zero_pulse_gives_zero_trace() {
        let z = synthesize_trace(&Pulse::zeros(4).unwrap(), 1).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn constant_pulse_concentrates_at_dc() {
        let x = Pulse::new(vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let z = synthesize_trace(&x, 1).unwrap();
        for p in 0..4 {
            assert!((z.values()[(p, 0)] - 16.0).abs() < 1e-12);
            for k in 1..4 {
                assert!(z.values()[(p, k)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stride_validation() {
        let x = seeded(8);
        assert!(matches!(
            synthesize_trace(&x, 0),
            Err(FrogError::InvalidStride { .. })
        ));
        assert!(matches!(
            synthesize_trace(&x, 8),
            Err(FrogError::InvalidStride { .. })
        ));
        assert_eq!(synthesize_trace(&x, 3).unwrap().delays(), 3);
    }

    #[test]
    fn distance_identity_and_scaling() {
        let x = seeded(12);
        assert!(trace_distance(&x, &x, 1).unwrap() < 1e-12);

        let rotated = apply_ambiguity(&x, Ambiguity::Rotation(0.77));
        assert!(trace_distance(&x, &rotated, 1).unwrap() < 1e-10);

        let doubled =
            Pulse::new(x.samples().iter().map(|s| 2.0 * s).collect()).unwrap();
        assert!((trace_distance(&x, &doubled, 1).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn distance_rejects_zero_reference() {
        let zero = Pulse::zeros(6).unwrap();
        let x = seeded(6);
        assert!(matches!(
            trace_distance(&zero, &x, 1),
            Err(FrogError::ZeroSignal { .. })
        ));
    }

    #[test]
    fn transform_rows_are_autocorrelations() {
        let x = seeded(10);
        let stride = 2;
        let z = synthesize_trace(&x, stride).unwrap();
        let y = transform_trace(&z);
        let n = 10;
        for p in 0..z.delays() {
            // conjugate symmetry within each row
            for l in 0..n {
                let a = y.values()[(p, (n - l) % n)];
                let b = y.values()[(p, l)].conj();
                assert!((a - b).norm() < 1e-10);
            }
            // lag zero carries the per-delay energy
            let direct: f64 = (0..n)
                .map(|m| x.at(m).norm_sqr() * x.at(m + p * stride).norm_sqr())
                .sum();
            assert!((y.values()[(p, 0)].re - direct).abs() < 1e-10 * direct.max(1.0));
            assert!(y.values()[(p, 0)].im.abs() < 1e-10);
        }
    }

    #[test]
    fn reconstitute_inverts_transform() {
        let x = seeded(9);
        let z = synthesize_trace(&x, 1).unwrap();
        let y = transform_trace(&z);
        let back = reconstitute_trace(y.values(), 1, 9).unwrap();
        let scale = z.values().iter().cloned().fold(0.0, f64::max);
        for (a, b) in back.values().iter().zip(z.values().iter()) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn negative_entries_are_clipped() {
        let mut values = Array2::zeros((4, 4));
        values[(0, 0)] = -3.0;
        values[(1, 2)] = 2.0;
        let z = FrogTrace::new(values, 1, 4).unwrap();
        assert_eq!(z.values()[(0, 0)], 0.0);
        assert_eq!(z.values()[(1, 2)], 2.0);
    }
}
