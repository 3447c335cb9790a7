//! Periodic upsampling of delay-subsampled sequences.
//!
//! Sequences recorded at delay positions `0, L, 2L, ...` on a circular grid
//! of length N are extended to all N positions either by a periodic cubic
//! Hermite interpolant (Catmull-Rom tangents, non-uniform knot spacing aware,
//! so `L` need not divide `N`) or by ideal low-pass upsampling of the
//! zero-inserted sequence with passband width `ceil(N/L)`.
//!
//! Both interpolants are linear in the data with real coefficients, so they
//! preserve the conjugate symmetry of autocorrelation sequences.

use crate::fft;
use num_complex::Complex64;

/// Periodic cubic Hermite interpolation through `(knots[i], values[i])` on a
/// circle of circumference `period`, evaluated at integers `0..period`.
///
/// Knots must be strictly increasing and inside `[0, period)`. Tangents are
/// the standard three-point finite differences, so the interpolant is C^1 and
/// reproduces the data at the knots exactly.
pub fn cubic_periodic(knots: &[f64], values: &[Complex64], period: usize) -> Vec<Complex64> {
    assert_eq!(knots.len(), values.len());
    let m = knots.len();
    assert!(m >= 2, "need at least two knots");
    let period_f = period as f64;

    // segment widths, including the wrap-around segment
    let width = |i: usize| -> f64 {
        if i + 1 < m {
            knots[i + 1] - knots[i]
        } else {
            period_f - knots[m - 1] + knots[0]
        }
    };
    // finite-difference tangent at knot i
    let tangent = |i: usize| -> Complex64 {
        let prev = (i + m - 1) % m;
        let next = (i + 1) % m;
        let h_prev = width(prev);
        let h_here = width(i);
        let d_prev = (values[i] - values[prev]) / h_prev;
        let d_here = (values[next] - values[i]) / h_here;
        0.5 * (d_prev + d_here)
    };

    let mut out = Vec::with_capacity(period);
    let mut seg = 0usize;
    for u in 0..period {
        let x = u as f64;
        // advance to the segment containing x (knots are sorted)
        while seg + 1 < m && knots[seg + 1] <= x {
            seg += 1;
        }
        let i = if x < knots[0] { m - 1 } else { seg };
        let next = (i + 1) % m;
        let h = width(i);
        let base = if x < knots[0] { knots[m - 1] - period_f } else { knots[i] };
        let s = (x - base) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        out.push(
            values[i] * h00
                + tangent(i) * (h * h10)
                + values[next] * h01
                + tangent(next) * (h * h11),
        );
    }
    out
}

/// Upsamples `values` recorded at `0, L, 2L, ...` to all `period` positions
/// by zero insertion followed by an ideal low-pass mask of passband width
/// `ceil(period/L)`.
pub fn lowpass_periodic(values: &[Complex64], stride: usize, period: usize) -> Vec<Complex64> {
    let r = values.len();
    let mut expanded = vec![Complex64::default(); period];
    for (p, &v) in values.iter().enumerate() {
        expanded[p * stride] = v;
    }
    fft::dft_inplace(&mut expanded);
    // symmetric passband of effective width r; for even r the two edge bins
    // get half weight so the mask stays reflection-symmetric
    for (k, slot) in expanded.iter_mut().enumerate() {
        let dist = k.min(period - k);
        let weight = match (2 * dist).cmp(&r) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        };
        *slot *= weight;
    }
    let mut out = fft::idft_unnormalized(&expanded);
    let scale = stride as f64 / period as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}
