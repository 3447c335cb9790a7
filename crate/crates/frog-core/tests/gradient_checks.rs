//! Finite-difference and Monte-Carlo certification of the Wirtinger gradient.

use frog_core::objective::l2_norm;
use frog_core::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pulse(n: usize, seed: u64) -> Pulse {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (0.6 / n as f64).sqrt();
    Pulse::new(
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
            .collect(),
    )
    .unwrap()
}

fn unit_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut d: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = l2_norm(&d);
    for v in &mut d {
        *v /= norm;
    }
    d
}

fn shifted(z: &Pulse, dir: &[Complex64], eps: f64) -> Pulse {
    Pulse::new(
        z.samples()
            .iter()
            .zip(dir)
            .map(|(a, b)| a + eps * b)
            .collect(),
    )
    .unwrap()
}

/// `|h(z+eps d) - h(z) - 2 eps Re(d^H g)| / eps` over random unit directions.
fn max_fd_error(z: &Pulse, data: &FrogTrace, mu: f64, directions: usize, seed: u64) -> f64 {
    let g = full_gradient(z, data, mu).unwrap();
    let h0 = loss(z, data, mu).unwrap();
    let eps = 1e-6 * z.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let dir = unit_direction(z.len(), &mut rng);
        let h1 = loss(&shifted(z, &dir, eps), data, mu).unwrap();
        let predicted: f64 = 2.0
            * dir
                .iter()
                .zip(&g)
                .map(|(di, gi)| (di.conj() * gi).re)
                .sum::<f64>();
        worst = worst.max((h1 - h0 - eps * predicted).abs() / eps);
    }
    worst
}

#[test]
fn gradient_matches_finite_differences_on_grid() {
    for (i, n) in [8usize, 16, 32].into_iter().enumerate() {
        for stride in [1usize, 2] {
            for mu in [0.1, 1.0, 10.0] {
                let truth = random_pulse(n, 7 + i as u64);
                let z = synthesize_trace(&truth, stride).unwrap();
                let probe = random_pulse(n, 1000 + i as u64 + stride as u64);
                let err = max_fd_error(&probe, &z, mu, 20, 5 + stride as u64);
                assert!(
                    err <= 1e-5,
                    "FD error {err:.3e} at N={n} L={stride} mu={mu}"
                );
            }
        }
    }
}

#[test]
fn single_term_gradient_matches_finite_differences() {
    // pins the per-term contribution, not just the sum
    let n = 12;
    let truth = random_pulse(n, 3);
    let z = synthesize_trace(&truth, 2).unwrap();
    let probe = random_pulse(n, 4);
    let mu = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let k = rng.gen_range(0..n);
        let p = rng.gen_range(0..z.delays());
        let block = BlockIndexSet::from_pairs(vec![(k, p)], n, z.delays()).unwrap();
        let g = block_gradient(&probe, &z, mu, &block).unwrap();

        // the (k,p) term of the loss, evaluated from scratch
        let term = |zp: &Pulse| -> f64 {
            let mut a = Complex64::default();
            for m in 0..n {
                let phase = Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (m * k) as f64 / n as f64,
                );
                a += zp.at(m) * zp.at(m + p * z.stride()) * phase;
            }
            let d = (a.norm_sqr() + mu * mu).sqrt() - z.values()[(p, k)].sqrt();
            d * d
        };
        let eps = 1e-7;
        let h0 = term(&probe);
        let mut rng2 = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let dir = unit_direction(n, &mut rng2);
            let h1 = term(&shifted(&probe, &dir, eps));
            let predicted: f64 = 2.0
                * dir
                    .iter()
                    .zip(&g)
                    .map(|(di, gi)| (di.conj() * gi).re)
                    .sum::<f64>();
            assert!(
                (h1 - h0 - eps * predicted).abs() / eps < 1e-4,
                "term ({k},{p})"
            );
        }
    }
}

#[test]
fn gradient_respects_conjugate_reflection_symmetry() {
    let n = 16;
    let truth = random_pulse(n, 21);
    let z = synthesize_trace(&truth, 1).unwrap();
    let probe = random_pulse(n, 22);
    let mu = 1.0;

    let reflected_truth = apply_ambiguity(&truth, Ambiguity::Reflection);
    let z_reflect = synthesize_trace(&reflected_truth, 1).unwrap();
    let probe_reflect = apply_ambiguity(&probe, Ambiguity::Reflection);

    let g = full_gradient(&probe, &z, mu).unwrap();
    let g_reflect = full_gradient(&probe_reflect, &z_reflect, mu).unwrap();

    let reflected_g: Vec<Complex64> = (0..n)
        .map(|i| g[(n - i) % n].conj())
        .collect();
    let scale = l2_norm(&g).max(1e-300);
    for (a, b) in g_reflect.iter().zip(&reflected_g) {
        assert!((a - b).norm() < 1e-9 * scale);
    }
}

#[test]
fn block_gradient_mean_approaches_scaled_full_gradient() {
    let n = 16;
    let truth = random_pulse(n, 31);
    let z = synthesize_trace(&truth, 1).unwrap();
    let probe = random_pulse(n, 32);
    let mu = 1.0;
    let q = n;
    let full = full_gradient(&probe, &z, mu).unwrap();
    let target: Vec<Complex64> = full.iter().map(|g| g * q as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let draws = 4000;
    let mut mean = vec![Complex64::default(); n];
    for _ in 0..draws {
        let block = sample_block(n, z.delays(), q, &mut rng).unwrap();
        let d = block_gradient(&probe, &z, mu, &block).unwrap();
        for (m, di) in mean.iter_mut().zip(&d) {
            *m += di;
        }
    }
    for m in &mut mean {
        *m /= draws as f64;
    }
    let diff: Vec<Complex64> = mean.iter().zip(&target).map(|(a, b)| a - b).collect();
    let rel = l2_norm(&diff) / l2_norm(&target);
    assert!(rel < 0.04, "relative deviation {rel:.4}");
}

#[test]
fn block_gradient_second_moment_is_stable() {
    let n = 16;
    let truth = random_pulse(n, 41);
    let z = synthesize_trace(&truth, 1).unwrap();
    let probe = random_pulse(n, 42);
    let mu = 1.0;
    let q = n;
    let nr = (n * z.delays()) as f64;
    let full = full_gradient(&probe, &z, mu).unwrap();
    let scaled: Vec<Complex64> = full.iter().map(|g| g * (q as f64 / nr)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut halves = [0.0f64; 2];
    let draws = 5000;
    for half in 0..2 {
        for _ in 0..draws {
            let block = sample_block(n, z.delays(), q, &mut rng).unwrap();
            let d = block_gradient(&probe, &z, mu, &block).unwrap();
            let dev: Vec<Complex64> = d
                .iter()
                .zip(&scaled)
                .map(|(di, si)| di / nr - si)
                .collect();
            halves[half] += l2_norm(&dev).powi(2);
        }
        halves[half] /= draws as f64;
    }
    assert!(halves[0].is_finite() && halves[1].is_finite());
    let ratio = halves[0] / halves[1];
    assert!((0.8..1.25).contains(&ratio), "halves {halves:?}");
}

#[test]
fn full_gradient_step_decreases_loss_near_truth() {
    let n = 16;
    let mut wins = 0;
    let trials = 20;
    for seed in 0..trials {
        let truth = random_pulse(n, 60 + seed);
        let z = synthesize_trace(&truth, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // nudge the truth until the start sits within dist 0.1
        let mean_mag = truth.samples().iter().map(|s| s.norm()).sum::<f64>() / n as f64;
        let start = perturbed_start(&truth, 0.05 * mean_mag, &mut rng);
        let mu = 0.5;
        let g = full_gradient(&start, &z, mu).unwrap();
        let alpha = 1e-3 / l2_norm(&g).max(1e-300);
        let stepped = Pulse::new(
            start
                .samples()
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi - alpha * gi)
                .collect(),
        )
        .unwrap();
        if loss(&stepped, &z, mu).unwrap() <= loss(&start, &z, mu).unwrap() {
            wins += 1;
        }
    }
    assert!(wins * 100 >= trials * 95, "descent held on {wins}/{trials}");
}

#[test]
fn smoothing_bias_vanishes_and_is_monotone_at_truth() {
    let n = 16;
    let truth = random_pulse(n, 71);
    let z = synthesize_trace(&truth, 1).unwrap();
    let base = loss(&truth, &z, 0.0).unwrap();
    assert!(base < 1e-25);
    let mut previous = f64::INFINITY;
    for mu in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let l = loss(&truth, &z, mu).unwrap();
        assert!(l <= previous, "loss at truth monotone in mu");
        assert!(l <= mu * mu, "bias bounded by mu^2: {l} vs {}", mu * mu);
        previous = l;
    }
    // random probes converge to the unsmoothed value as mu -> 0, with the
    // gap bounded by a fixed multiple of mu^2
    let probe = random_pulse(n, 72);
    let raw = loss(&probe, &z, 0.0).unwrap();
    let mut previous_gap = f64::INFINITY;
    for mu in [1e-2, 1e-3, 1e-4] {
        let gap = (loss(&probe, &z, mu).unwrap() - raw).abs();
        assert!(gap <= 1e3 * mu * mu * (1.0 + raw));
        assert!(gap <= previous_gap);
        previous_gap = gap;
    }
}
