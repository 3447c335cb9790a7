//! Spectral initialization by alternating per-lag least squares.
//!
//! The transformed trace satisfies, lag by lag, the linear model
//! `y_l = G_l x_l` where `x_l = diag(x x^H, l)` and
//! `G_l[p,n] = x[n+pL] conj(x[n+pL+l])`. The initializer alternates between
//! (a) solving a proximally regularized least-squares problem for every lag
//! vector with `G_l` built from the current signal iterate, and (b) collapsing
//! the lag vectors into a matrix whose leading eigenvector is the next signal
//! iterate. The starting iterate sums the measured trace over frequency and
//! attaches uniformly random phases. For undersampled traces (stride > 1) the
//! lag sequences are first upsampled to the full delay grid and an equivalent
//! stride-1 trace is reconstituted.
//!
//! The recovered eigenvector is scaled by the square root of the positive
//! part of the lag-0 solution, which estimates the signal energy.

use crate::error::{FrogError, Result};
use crate::fft;
use crate::interp;
use crate::pulse::Pulse;
use crate::trace::{delay_count, reconstitute_trace, transform_trace, FrogTrace};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Upsampling flavor for stride > 1 initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Periodic cubic Hermite through the recorded delays (default).
    Cubic,
    /// Ideal low-pass upsampling with passband width `ceil(N/L)`.
    Lowpass,
}

/// Tunables of the alternating initializer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    /// Number of alternating iterations T.
    pub iterations: usize,
    /// Proximal weight; the regularizer is `1/(2 lambda) ||p - x_prev||^2`.
    pub lambda: f64,
    /// Seed for the random starting phases.
    pub seed: u64,
    /// Upsampling method for stride > 1.
    pub interpolation: Interpolation,
    /// Power iteration cap.
    pub power_iters: usize,
    /// Power iteration residual tolerance (relative to the matrix norm).
    pub power_tol: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            iterations: 2,
            lambda: 0.5,
            seed: 0,
            interpolation: Interpolation::Cubic,
            power_iters: 500,
            power_tol: 1e-10,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(FrogError::InvalidParameter {
                what: "init iterations T must be >= 1".into(),
            });
        }
        if !(self.lambda > 0.0) {
            return Err(FrogError::InvalidParameter {
                what: format!("lambda must be > 0, got {}", self.lambda),
            });
        }
        if self.power_iters == 0 || !(self.power_tol > 0.0) {
            return Err(FrogError::InvalidParameter {
                what: "power iteration settings must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Per-lag estimates of the wrapped diagonals of `x x^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEstimate {
    per_lag: Vec<Vec<Complex64>>,
}

impl DiagonalEstimate {
    pub fn new(per_lag: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = per_lag.len();
        if n == 0 || per_lag.iter().any(|v| v.len() != n) {
            return Err(FrogError::DimensionMismatch {
                what: "diagonal estimate needs N lag vectors of length N".into(),
            });
        }
        Ok(DiagonalEstimate { per_lag })
    }

    /// Extracts all wrapped diagonals `diag(X, l)[j] = X[j, (j+l) mod N]`.
    pub fn from_matrix(x: &Array2<Complex64>) -> Self {
        let n = x.nrows();
        let per_lag = (0..n)
            .map(|l| (0..n).map(|j| x[(j, (j + l) % n)]).collect())
            .collect();
        DiagonalEstimate { per_lag }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.per_lag.len()
    }

    #[inline]
    pub fn lag(&self, l: usize) -> &[Complex64] {
        &self.per_lag[l]
    }

    pub fn lag_mut(&mut self, l: usize) -> &mut Vec<Complex64> {
        &mut self.per_lag[l]
    }
}

/// Places each lag vector back on its wrapped diagonal.
pub fn assemble_x0(diag: &DiagonalEstimate) -> Array2<Complex64> {
    let n = diag.n();
    let mut x = Array2::default((n, n));
    for l in 0..n {
        let v = diag.lag(l);
        for j in 0..n {
            x[(j, (j + l) % n)] = v[j];
        }
    }
    x
}

/// The per-lag measurement operator `G_l[p,n] = w[n+pL] conj(w[n+pL+l])`.
///
/// Stored implicitly through its source signal. For stride 1 the operator is
/// square with `G_l[p,n] = c[(n+p) mod N]`, `c = w .* shift_l(conj(w))`, and
/// the regularized normal equations diagonalize in the DFT basis.
#[derive(Debug, Clone)]
pub struct GMatrix {
    source: Vec<Complex64>,
    lag: usize,
    stride: usize,
    rows: usize,
}

/// Builds `G_l` from the current signal iterate.
pub fn build_g(w: &Pulse, lag: usize, stride: usize) -> Result<GMatrix> {
    let n = w.len();
    if stride == 0 || stride >= n {
        return Err(FrogError::InvalidStride { stride, n });
    }
    Ok(GMatrix {
        source: w.samples().to_vec(),
        lag: lag % n,
        stride,
        rows: delay_count(n, stride),
    })
}

impl GMatrix {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.source.len()
    }

    #[inline]
    pub fn entry(&self, p: usize, j: usize) -> Complex64 {
        let n = self.source.len();
        let base = (j + p * self.stride) % n;
        self.source[base] * self.source[(base + self.lag) % n].conj()
    }

    /// `c[m] = w[m] conj(w[m+l])`; for stride 1, row p of G is c shifted by p.
    fn first_row(&self) -> Vec<Complex64> {
        let n = self.source.len();
        (0..n)
            .map(|m| self.source[m] * self.source[(m + self.lag) % n].conj())
            .collect()
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut g = Array2::default((self.rows, self.cols()));
        for p in 0..self.rows {
            for j in 0..self.cols() {
                g[(p, j)] = self.entry(p, j);
            }
        }
        g
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|p| (0..self.cols()).map(|j| self.entry(p, j) * v[j]).sum())
            .collect()
    }

    pub fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.cols())
            .map(|j| {
                (0..self.rows)
                    .map(|p| self.entry(p, j).conj() * u[p])
                    .sum()
            })
            .collect()
    }

    fn is_square_stride1(&self) -> bool {
        self.stride == 1 && self.rows == self.cols()
    }
}

/// Solves `min_p ||y - G p||^2 + (1/(2 lambda)) ||p - x_prev||^2`.
///
/// The closed form is `(G^H G + (1/(2 lambda)) I)^{-1} (G^H y + (1/(2 lambda)) x_prev)`;
/// the system matrix is always invertible for finite positive lambda. Square
/// stride-1 operators are solved in the DFT basis, everything else by dense
/// elimination; the two paths agree to machine precision.
pub fn proximal_solve(
    g: &GMatrix,
    y: &[Complex64],
    x_prev: &[Complex64],
    lambda: f64,
) -> Result<Vec<Complex64>> {
    let n = g.cols();
    if y.len() != g.rows() || x_prev.len() != n {
        return Err(FrogError::DimensionMismatch {
            what: format!(
                "proximal solve needs y of length {} and x_prev of length {}, got {} and {}",
                g.rows(),
                n,
                y.len(),
                x_prev.len()
            ),
        });
    }
    if !(lambda > 0.0) {
        return Err(FrogError::InvalidParameter {
            what: format!("lambda must be > 0, got {lambda}"),
        });
    }
    let sigma = 0.5 / lambda;

    let mut rhs = g.apply_adjoint(y);
    for (r, xp) in rhs.iter_mut().zip(x_prev) {
        *r += sigma * xp;
    }

    if g.is_square_stride1() {
        // B = G^H G + sigma I is circulant with eigenvalues
        // sigma + |c_hat[(N-k) mod N]|^2
        let c_hat = fft::dft(&g.first_row());
        let mut rhs_hat = fft::dft(&rhs);
        for (k, slot) in rhs_hat.iter_mut().enumerate() {
            let eig = sigma + c_hat[(n - k) % n].norm_sqr();
            *slot /= eig;
        }
        return Ok(fft::idft(&rhs_hat));
    }

    let dense = g.to_dense();
    let mut b = Array2::<Complex64>::default((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::default();
            for p in 0..g.rows() {
                acc += dense[(p, i)].conj() * dense[(p, j)];
            }
            if i == j {
                acc += sigma;
            }
            b[(i, j)] = acc;
        }
    }
    lu_solve(b, rhs)
}

/// Dense LU with partial pivoting for the general (non-circulant) case.
fn lu_solve(mut a: Array2<Complex64>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[(i, col)]
                    .norm_sqr()
                    .partial_cmp(&a[(j, col)].norm_sqr())
                    .expect("finite pivots")
            })
            .expect("non-empty column");
        if a[(pivot, col)].norm_sqr() == 0.0 {
            return Err(FrogError::Numeric {
                what: "singular system in proximal solve".into(),
            });
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            b.swap(col, pivot);
        }
        let diag = a[(col, col)];
        for i in col + 1..n {
            let factor = a[(i, col)] / diag;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in col..n {
                let update = factor * a[(col, j)];
                a[(i, j)] -= update;
            }
            let update = factor * b[col];
            b[i] -= update;
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= a[(i, j)] * b[j];
        }
        b[i] = acc / a[(i, i)];
    }
    Ok(b)
}

/// Leading eigenvector extraction by power iteration.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Unit-norm eigenvector, phase-fixed so the largest-magnitude entry is
    /// real and positive.
    pub vector: Vec<Complex64>,
    /// Rayleigh quotient at the returned vector.
    pub eigenvalue: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `|| H v - lambda v ||_2` at the returned vector.
    pub residual: f64,
}

/// Unit-norm eigenvector of the eigenvalue of largest magnitude.
///
/// The input is Hermitized as `(X + X^H)/2` first; the iteration starts from
/// the deterministic all-ones vector, so degenerate spectra still give
/// reproducible output. Non-convergence is reported in the result, with the
/// best iterate returned.
pub fn leading_eigvec(x: &Array2<Complex64>, power_iters: usize, power_tol: f64) -> Result<EigenResult> {
    let n = x.nrows();
    if x.ncols() != n || n == 0 {
        return Err(FrogError::DimensionMismatch {
            what: format!("eigen input must be square, got {}x{}", n, x.ncols()),
        });
    }
    if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(FrogError::Numeric {
            what: "eigen input contains non-finite entries".into(),
        });
    }
    let mut h = Array2::<Complex64>::default((n, n));
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = 0.5 * (x[(i, j)] + x[(j, i)].conj());
        }
    }
    let h_scale = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    let mut v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let matvec = |v: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| (0..n).map(|j| h[(i, j)] * v[j]).sum())
            .collect()
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 0..power_iters {
        iterations = it + 1;
        let hv = matvec(&v);
        let rayleigh: f64 = v
            .iter()
            .zip(&hv)
            .map(|(vi, hvi)| (vi.conj() * hvi).re)
            .sum();
        residual = v
            .iter()
            .zip(&hv)
            .map(|(vi, hvi)| (hvi - rayleigh * vi).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= power_tol * h_scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let norm = hv.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            // the zero matrix: every unit vector qualifies
            converged = true;
            residual = 0.0;
            break;
        }
        for (vi, hvi) in v.iter_mut().zip(&hv) {
            *vi = hvi / norm;
        }
    }

    // fix the global phase: largest-magnitude entry becomes real positive
    let (best, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bm), (i, c)| {
            let m = c.norm_sqr();
            if m > bm {
                (i, m)
            } else {
                (bi, bm)
            }
        });
    if v[best].norm() > 0.0 {
        let rot = v[best].conj() / v[best].norm();
        for vi in &mut v {
            *vi *= rot;
        }
    }

    let hv = matvec(&v);
    let eigenvalue: f64 = v
        .iter()
        .zip(&hv)
        .map(|(vi, hvi)| (vi.conj() * hvi).re)
        .sum();
    Ok(EigenResult {
        vector: v,
        eigenvalue,
        converged,
        iterations,
        residual,
    })
}

/// Ptychography-style starting vector: trace rows summed over frequency with
/// uniformly random phases.
///
/// For stride > 1 the per-delay sums are upsampled to the full grid by
/// periodic cubic interpolation (negative overshoots clipped) before the
/// phases are attached.
pub fn ptych_start<R: Rng>(z_data: &FrogTrace, rng: &mut R) -> Pulse {
    let n = z_data.n();
    let r = z_data.delays();
    let scale = 1.0 / n as f64;
    let v: Vec<f64> = (0..r)
        .map(|p| z_data.values().row(p).sum() * scale)
        .collect();
    let magnitudes: Vec<f64> = if r == n {
        v
    } else {
        let knots: Vec<f64> = (0..r).map(|p| (p * z_data.stride()) as f64).collect();
        let values: Vec<Complex64> = v.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        interp::cubic_periodic(&knots, &values, n)
            .into_iter()
            .map(|c| c.re.max(0.0))
            .collect()
    };
    let samples = magnitudes
        .into_iter()
        .map(|m| {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(m, theta)
        })
        .collect();
    Pulse::new(samples).expect("trace N is at least 4")
}

/// One alternating iteration's diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitIterDiag {
    pub t: usize,
    /// Mean over lags of `||y_l - G_l x_l||_2` after the proximal update.
    pub mean_lag_residual: f64,
    pub eigen_residual: f64,
}

/// Output of the spectral initializer.
#[derive(Debug, Clone)]
pub struct InitResult {
    pub pulse: Pulse,
    pub diagnostics: Vec<InitIterDiag>,
    /// False when the final power iteration hit its cap before the residual
    /// tolerance.
    pub eigen_converged: bool,
}

/// Alternating spectral initialization for complete (stride 1) traces.
///
/// The scheme is not scale-equivariant as written: the proximal weight is an
/// absolute constant while the least-squares term scales with the fourth
/// power of the signal. The trace is therefore normalized to unit implied
/// signal norm first -- `sum_p y_0[p]` equals `||x||^4` for stride-1 data --
/// and the result is scaled back at the end, which makes the default lambda
/// meaningful for any input scale.
pub fn init_l1(z_data: &FrogTrace, cfg: &InitConfig) -> Result<InitResult> {
    if z_data.stride() != 1 {
        return Err(FrogError::InvalidParameter {
            what: format!("init_l1 requires stride 1, got {}", z_data.stride()),
        });
    }
    cfg.validate()?;
    let n = z_data.n();

    // ||x||^4 from the frequency-summed trace
    let norm4: f64 = z_data.values().iter().sum::<f64>() / n as f64;
    if norm4 <= 0.0 {
        return Ok(InitResult {
            pulse: Pulse::zeros(n)?,
            diagnostics: Vec::new(),
            eigen_converged: true,
        });
    }
    let signal_norm = norm4.powf(0.25);
    let z_data = &FrogTrace::new(z_data.values() / norm4, 1, n)?;

    let y = transform_trace(z_data);
    let lag_targets: Vec<Vec<Complex64>> = (0..n).map(|l| y.lag_sequence(l)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(crate::signal::stream_id::INIT);
    let start = ptych_start(z_data, &mut rng);

    // X0 = start * start^H seeds the lag estimates; G is built from the
    // starting vector itself on the first pass and from the current leading
    // eigenvector afterwards.
    let mut lags = {
        let s = start.samples();
        let per_lag = (0..n)
            .map(|l| (0..n).map(|j| s[j] * s[(j + l) % n].conj()).collect())
            .collect();
        DiagonalEstimate::new(per_lag)?
    };
    let mut iterate = start.clone();

    let mut diagnostics = Vec::with_capacity(cfg.iterations);
    let mut eigen_converged = true;
    for t in 1..=cfg.iterations {
        let mut residual_sum = 0.0;
        for l in 0..n {
            let g = build_g(&iterate, l, 1)?;
            let solution = proximal_solve(&g, &lag_targets[l], lags.lag(l), cfg.lambda)?;
            residual_sum += diff_norm(&g.apply(&solution), &lag_targets[l]);
            *lags.lag_mut(l) = solution;
        }

        let x0 = assemble_x0(&lags);
        let eig = leading_eigvec(&x0, cfg.power_iters, cfg.power_tol)?;
        eigen_converged = eig.converged;
        diagnostics.push(InitIterDiag {
            t,
            mean_lag_residual: residual_sum / n as f64,
            eigen_residual: eig.residual,
        });
        iterate = Pulse::new(eig.vector)?;
    }

    // Energy recovery. The positive part of the lag-0 solution estimates
    // sum_n diag(x x^H, 0)[n] = ||x||^2, but at small T the proximal anchor
    // attenuates its mean component (measurably ~0.53 of the truth at T=2),
    // so the exact identity behind that estimator is used directly: the
    // frequency-summed trace already fixed ||x||^4 above.
    let pulse = Pulse::new(iterate.samples().iter().map(|s| s * signal_norm).collect())?;
    Ok(InitResult {
        pulse,
        diagnostics,
        eigen_converged,
    })
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Spectral initialization for undersampled (stride > 1) traces: upsamples
/// every lag sequence to the full delay grid, reconstitutes an equivalent
/// stride-1 trace and runs [`init_l1`] on it.
pub fn init_lgt1(z_data: &FrogTrace, cfg: &InitConfig) -> Result<InitResult> {
    let stride = z_data.stride();
    if stride <= 1 {
        return Err(FrogError::InvalidParameter {
            what: format!("init_lgt1 requires stride > 1, got {stride}"),
        });
    }
    cfg.validate()?;
    let upsampled = upsample_trace(z_data, cfg.interpolation)?;
    init_l1(&upsampled, cfg)
}

/// Upsamples the transformed-domain lag sequences of an undersampled trace
/// and reconstitutes the corresponding stride-1 intensity trace.
pub fn upsample_trace(z_data: &FrogTrace, interpolation: Interpolation) -> Result<FrogTrace> {
    let stride = z_data.stride();
    let n = z_data.n();
    let r = z_data.delays();
    let y = transform_trace(z_data);
    let mut y_full = Array2::<Complex64>::default((n, n));
    let knots: Vec<f64> = (0..r).map(|p| (p * stride) as f64).collect();
    for l in 0..n {
        let seq = y.lag_sequence(l);
        let dense = match interpolation {
            Interpolation::Cubic => interp::cubic_periodic(&knots, &seq, n),
            Interpolation::Lowpass => interp::lowpass_periodic(&seq, stride, n),
        };
        for p in 0..n {
            y_full[(p, l)] = dense[p];
        }
    }
    reconstitute_trace(&y_full, 1, n)
}

/// Dispatches on the trace stride, mirroring how the solver is seeded.
pub fn spectral_init(z_data: &FrogTrace, cfg: &InitConfig) -> Result<InitResult> {
    if z_data.stride() == 1 {
        init_l1(z_data, cfg)
    } else {
        init_lgt1(z_data, cfg)
    }
}
