//! Property tests for the structural invariants of the trace model and the
//! file formats.

use frog_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn arb_pulse(max_n: usize) -> impl Strategy<Value = Pulse> {
    (4usize..=max_n)
        .prop_flat_map(|n| {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        })
        .prop_map(|pairs| {
            Pulse::new(
                pairs
                    .into_iter()
                    .map(|(re, im)| Complex64::new(re, im))
                    .collect(),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_invariant_under_trivial_ambiguities(
        x in arb_pulse(12),
        phi in 0.0f64..6.28,
        shift in -12isize..12,
        stride in 1usize..4,
    ) {
        prop_assume!(stride < x.len());
        let z = synthesize_trace(&x, stride).unwrap();
        let peak = z.values().iter().cloned().fold(0.0f64, f64::max).max(1e-300);
        for kind in [Ambiguity::Rotation(phi), Ambiguity::Shift(shift), Ambiguity::Reflection] {
            let w = apply_ambiguity(&x, kind);
            let zw = synthesize_trace(&w, stride).unwrap();
            for (a, b) in z.values().iter().zip(zw.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-10 * peak);
            }
        }
    }

    #[test]
    fn transformed_rows_are_conjugate_symmetric(
        x in arb_pulse(12),
        stride in 1usize..4,
    ) {
        prop_assume!(stride < x.len());
        let n = x.len();
        let y = transform_trace(&synthesize_trace(&x, stride).unwrap());
        let peak = y.values().iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1e-300);
        for p in 0..y.delays() {
            prop_assert!(y.values()[(p, 0)].im.abs() <= 1e-10 * peak);
            prop_assert!(y.values()[(p, 0)].re >= -1e-10 * peak);
            for l in 0..n {
                let a = y.values()[(p, (n - l) % n)];
                let b = y.values()[(p, l)].conj();
                prop_assert!((a - b).norm() <= 1e-10 * peak);
            }
        }
    }

    #[test]
    fn pulse_csv_round_trips_exactly(x in arb_pulse(16)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pulse.csv");
        io::write_pulse_csv(&path, &x).unwrap();
        let back = io::read_pulse_csv(&path).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn trace_csv_round_trips_exactly(x in arb_pulse(12), stride in 1usize..4) {
        prop_assume!(stride < x.len());
        let z = synthesize_trace(&x, stride).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        io::write_trace_csv(&path, &z).unwrap();
        let back = io::read_trace_csv(&path).unwrap();
        prop_assert_eq!(&back, &z);
    }

    #[test]
    fn block_sampling_is_uniform_in_range(
        seed in 0u64..1000,
        q in 1usize..20,
    ) {
        use rand::SeedableRng;
        let (n, r) = (8usize, 4usize);
        prop_assume!(q <= n * r);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let block = sample_block(n, r, q, &mut rng).unwrap();
        prop_assert_eq!(block.len(), q);
        prop_assert!(block.pairs().iter().all(|&(k, p)| k < n && p < r));
        prop_assert!(block.pairs().windows(2).all(|w| w[0] != w[1]));
    }
}

#[test]
fn single_pair_frequencies_are_uniform() {
    use rand::SeedableRng;
    let (n, r) = (6usize, 3usize);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
    let draws = 100_000usize;
    let mut counts = vec![0usize; n * r];
    for _ in 0..draws {
        let block = sample_block(n, r, 1, &mut rng).unwrap();
        let (k, p) = block.pairs()[0];
        counts[p * n + k] += 1;
    }
    let expected = draws as f64 / (n * r) as f64;
    // three standard errors of a binomial count
    let tolerance = 3.0 * (expected * (1.0 - 1.0 / (n * r) as f64)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!(
            (c as f64 - expected).abs() <= tolerance,
            "pair {i}: {c} vs {expected:.1} +- {tolerance:.1}"
        );
    }
}
