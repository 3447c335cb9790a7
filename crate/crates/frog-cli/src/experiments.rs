//! Seeded experiment runners.
//!
//! Every experiment is a pure function of its config and master seed: trial
//! seeds are derived as `master_seed + trial_index`, and each randomness
//! consumer (pulse, noise, perturbation, initializer, solver blocks) draws
//! from its own ChaCha stream, so re-running a config reproduces every
//! output file byte for byte. Trials run in parallel; rows are sorted
//! deterministically before writing.
//!
//! Each run directory contains:
//! - `config.json`: echo of the resolved configuration,
//! - `results.csv`: one row per trial (and per method, where an experiment
//!   compares several) with the final error, iteration count and success
//!   flag,
//! - `aggregates.csv`: per-cell means, medians and success rates,
//! - `timings.csv`: wall-clock times, kept out of the deterministic files.

use frog_core::signal::stream_id;
use frog_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Success threshold on the relative error, from the reference protocol.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SuccessRate,
    InitCompare,
    NoiseSweep,
    Bench,
    SingleSolve,
}

/// Optional solver overrides; unset fields fall back to the published
/// defaults for the experiment's grid size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOverrides {
    pub gamma1: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub mu0: Option<f64>,
    pub block_size: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub full_gradient_termination: Option<bool>,
    pub tail_average: Option<bool>,
}

impl SolverOverrides {
    pub fn resolve(&self, n: usize, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::defaults(n);
        if let Some(v) = self.gamma1 {
            cfg.gamma1 = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        if let Some(v) = self.block_size {
            cfg.block_size = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.full_gradient_termination {
            cfg.full_gradient_termination = v;
        }
        if let Some(v) = self.tail_average {
            cfg.tail_average = v;
        }
        cfg.seed = seed;
        cfg
    }
}

/// Optional initializer overrides, resolved the same way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitOverrides {
    pub iterations: Option<usize>,
    pub lambda: Option<f64>,
    pub interpolation: Option<Interpolation>,
    pub power_iters: Option<usize>,
    pub power_tol: Option<f64>,
}

impl InitOverrides {
    pub fn resolve(&self, seed: u64) -> InitConfig {
        let mut cfg = InitConfig::default();
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.interpolation {
            cfg.interpolation = v;
        }
        if let Some(v) = self.power_iters {
            cfg.power_iters = v;
        }
        if let Some(v) = self.power_tol {
            cfg.power_tol = v;
        }
        cfg.seed = seed;
        cfg
    }
}

/// A full experiment description. Unknown keys in config files are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    #[serde(default = "default_l_list")]
    pub l_list: Vec<usize>,
    /// Perturbation amplitudes for the success-rate protocol.
    #[serde(default)]
    pub delta_list: Vec<f64>,
    /// SNR grid in dB; empty means noiseless.
    #[serde(default)]
    pub snr_list: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub init: InitOverrides,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

fn default_l_list() -> Vec<usize> {
    vec![1]
}

fn default_threshold() -> f64 {
    DEFAULT_SUCCESS_THRESHOLD
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(FrogError::PulseTooShort { n: self.n });
        }
        if self.trials == 0 {
            return Err(FrogError::InvalidParameter {
                what: "trials must be >= 1".into(),
            });
        }
        if self.l_list.is_empty() {
            return Err(FrogError::InvalidParameter {
                what: "l_list must not be empty".into(),
            });
        }
        for &l in &self.l_list {
            if l == 0 || l >= self.n {
                return Err(FrogError::InvalidStride { stride: l, n: self.n });
            }
        }
        if self.kind == ExperimentKind::SuccessRate && self.delta_list.is_empty() {
            return Err(FrogError::InvalidParameter {
                what: "success_rate needs a non-empty delta_list".into(),
            });
        }
        if !(self.success_threshold > 0.0) {
            return Err(FrogError::InvalidParameter {
                what: "success_threshold must be > 0".into(),
            });
        }
        Ok(())
    }

    /// SNR grid with the noiseless sentinel when nothing was requested.
    fn snr_grid(&self) -> Vec<f64> {
        if self.snr_list.is_empty() {
            vec![f64::INFINITY]
        } else {
            self.snr_list.clone()
        }
    }
}

/// One measured trial (or one method within a trial).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub l: usize,
    pub delta_or_snr: f64,
    pub trial: usize,
    pub method: &'static str,
    pub dist_final: f64,
    pub iterations: usize,
    pub success: bool,
    pub wall_time: f64,
}

/// Per-cell aggregate over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub l: usize,
    pub delta_or_snr: f64,
    pub method: &'static str,
    pub trials: usize,
    pub mean_dist: f64,
    pub median_dist: f64,
    pub success_rate: f64,
    /// Median iteration count over successful trials (0 when none).
    pub median_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    pub fn aggregate(&self, l: usize, param: f64, method: &str) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| {
            a.l == l && a.method == method && (a.delta_or_snr == param || (a.delta_or_snr.is_nan() && param.is_nan()))
        })
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn trial_pulse(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Pulse> {
    generate_pulse(&PulseSpec::paper(cfg.n, trial_seed))
}

fn trial_trace(x: &Pulse, l: usize, snr: f64, trial_seed: u64) -> Result<FrogTrace> {
    let clean = synthesize_trace(x, l)?;
    if snr.is_infinite() {
        Ok(clean)
    } else {
        let mut rng = rng_for(trial_seed, stream_id::NOISE);
        add_noise(&clean, snr, &mut rng)
    }
}

/// Distance of a solve outcome, with divergence treated as a failed trial.
fn solve_outcome(
    z: &FrogTrace,
    x0: &Pulse,
    solver: &SolverConfig,
    truth: &Pulse,
) -> (f64, usize, f64) {
    match bsga_solve(z, x0, solver, Some(truth)) {
        Ok(rep) => (
            rep.final_dist().unwrap_or(f64::INFINITY),
            rep.iterations,
            rep.wall_time,
        ),
        Err(_) => (f64::INFINITY, 0, 0.0),
    }
}

/// Runs the configured experiment and persists its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let mut rows = match cfg.kind {
        ExperimentKind::SuccessRate => run_success_rate(cfg)?,
        ExperimentKind::InitCompare => run_init_compare(cfg)?,
        ExperimentKind::NoiseSweep => run_noise_sweep(cfg)?,
        ExperimentKind::Bench => run_bench(cfg)?,
        ExperimentKind::SingleSolve => run_single_solve(cfg)?,
    };
    rows.sort_by(|a, b| {
        (a.l, a.delta_or_snr.to_bits(), a.trial, a.method)
            .cmp(&(b.l, b.delta_or_snr.to_bits(), b.trial, b.method))
    });
    let aggregates = aggregate(&rows);
    write_outputs(cfg, &rows, &aggregates)?;
    Ok(ExperimentSummary {
        rows,
        aggregates,
        output_dir: cfg.output_dir.clone(),
    })
}

/// Fig.-1 protocol: solves from `x + delta * zeta` on fresh noiseless pulses.
fn run_success_rate(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    let mut cells = Vec::new();
    for &l in &cfg.l_list {
        for &delta in &cfg.delta_list {
            for trial in 0..cfg.trials {
                cells.push((l, delta, trial));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(l, delta, trial)| {
            let trial_seed = cfg.master_seed.wrapping_add(trial as u64);
            let x = trial_pulse(cfg, trial_seed)?;
            let z = trial_trace(&x, l, f64::INFINITY, trial_seed)?;
            let mut rng = rng_for(trial_seed, stream_id::PERTURB);
            let x0 = perturbed_start(&x, delta, &mut rng);
            let solver = cfg.solver.resolve(cfg.n, trial_seed);
            let (dist, iterations, wall) = solve_outcome(&z, &x0, &solver, &x);
            Ok(TrialRow {
                l,
                delta_or_snr: delta,
                trial,
                method: "solve",
                dist_final: dist,
                iterations,
                success: dist < cfg.success_threshold,
                wall_time: wall,
            })
        })
        .collect()
}

/// Fig.-2/4 protocol: relative error of the ptych start vs the spectral
/// initializer, per (L, SNR) cell.
fn run_init_compare(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    let mut cells = Vec::new();
    for &l in &cfg.l_list {
        for &snr in &cfg.snr_grid() {
            for trial in 0..cfg.trials {
                cells.push((l, snr, trial));
            }
        }
    }
    let nested: Vec<Vec<TrialRow>> = cells
        .into_par_iter()
        .map(|(l, snr, trial)| {
            let trial_seed = cfg.master_seed.wrapping_add(trial as u64);
            let x = trial_pulse(cfg, trial_seed)?;
            let z = trial_trace(&x, l, snr, trial_seed)?;
            let gauge = SqrtTrace::of(&x, l)?;

            let start = std::time::Instant::now();
            let mut rng = rng_for(trial_seed, stream_id::PTYCH);
            let pty = ptych_start(&z, &mut rng);
            let d_pty = gauge.distance_to(&pty)?;
            let t_pty = start.elapsed().as_secs_f64();

            let start = std::time::Instant::now();
            let init = spectral_init(&z, &cfg.init.resolve(trial_seed))?;
            let d_init = gauge.distance_to(&init.pulse)?;
            let t_init = start.elapsed().as_secs_f64();

            Ok(vec![
                TrialRow {
                    l,
                    delta_or_snr: snr,
                    trial,
                    method: "ptych",
                    dist_final: d_pty,
                    iterations: 0,
                    success: d_pty < cfg.success_threshold,
                    wall_time: t_pty,
                },
                TrialRow {
                    l,
                    delta_or_snr: snr,
                    trial,
                    method: "spectral",
                    dist_final: d_init,
                    iterations: cfg.init.resolve(trial_seed).iterations,
                    success: d_init < cfg.success_threshold,
                    wall_time: t_init,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Full pipeline under measurement noise: spectral init then solve, one row
/// per (L, SNR, trial). Noisy runs default to the tail-averaged estimate and
/// a 1500-iteration cap unless overridden.
fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    let mut cells = Vec::new();
    for &l in &cfg.l_list {
        for &snr in &cfg.snr_grid() {
            for trial in 0..cfg.trials {
                cells.push((l, snr, trial));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(l, snr, trial)| {
            let trial_seed = cfg.master_seed.wrapping_add(trial as u64);
            let x = trial_pulse(cfg, trial_seed)?;
            let z = trial_trace(&x, l, snr, trial_seed)?;
            let init = spectral_init(&z, &cfg.init.resolve(trial_seed))?;
            let mut solver = cfg.solver.resolve(cfg.n, trial_seed);
            if cfg.solver.tail_average.is_none() {
                solver.tail_average = true;
            }
            if cfg.solver.max_iters.is_none() {
                solver.max_iters = 1500;
            }
            let gauge_truth = x.clone();
            let (dist, iterations, wall) = solve_outcome(&z, &init.pulse, &solver, &gauge_truth);
            Ok(TrialRow {
                l,
                delta_or_snr: snr,
                trial,
                method: "solve",
                dist_final: dist,
                iterations,
                success: dist < cfg.success_threshold,
                wall_time: wall,
            })
        })
        .collect()
}

/// Iteration-count benchmark on noiseless data: the `iterations` column
/// holds the step count at which the error first crossed the threshold.
fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    let mut cells = Vec::new();
    for &l in &cfg.l_list {
        for trial in 0..cfg.trials {
            cells.push((l, trial));
        }
    }
    cells
        .into_par_iter()
        .map(|(l, trial)| {
            let trial_seed = cfg.master_seed.wrapping_add(trial as u64);
            let x = trial_pulse(cfg, trial_seed)?;
            let z = trial_trace(&x, l, f64::INFINITY, trial_seed)?;
            let init = spectral_init(&z, &cfg.init.resolve(trial_seed))?;
            let solver = cfg.solver.resolve(cfg.n, trial_seed);
            let start = std::time::Instant::now();
            let outcome = bsga_solve(&z, &init.pulse, &solver, Some(&x));
            let wall = start.elapsed().as_secs_f64();
            let (dist, to_threshold) = match &outcome {
                Ok(rep) => (
                    rep.final_dist().unwrap_or(f64::INFINITY),
                    rep.iterations_to(cfg.success_threshold),
                ),
                Err(_) => (f64::INFINITY, None),
            };
            let success = to_threshold.is_some();
            let iterations = to_threshold
                .unwrap_or_else(|| outcome.as_ref().map(|r| r.iterations).unwrap_or(0));
            Ok(TrialRow {
                l,
                delta_or_snr: f64::INFINITY,
                trial,
                method: "solve",
                dist_final: dist,
                iterations,
                success,
                wall_time: wall,
            })
        })
        .collect()
}

/// One synthesize-init-solve run; also writes the solve report.
fn run_single_solve(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>> {
    let l = cfg.l_list[0];
    let snr = cfg.snr_grid()[0];
    let trial_seed = cfg.master_seed;
    let x = trial_pulse(cfg, trial_seed)?;
    let z = trial_trace(&x, l, snr, trial_seed)?;
    let init = spectral_init(&z, &cfg.init.resolve(trial_seed))?;
    let solver = cfg.solver.resolve(cfg.n, trial_seed);
    let report = bsga_solve(&z, &init.pulse, &solver, Some(&x))?;
    fs::create_dir_all(&cfg.output_dir)?;
    io::write_report_json(cfg.output_dir.join("report.json"), &report)?;
    let dist = report.final_dist().unwrap_or(f64::INFINITY);
    Ok(vec![TrialRow {
        l,
        delta_or_snr: snr,
        trial: 0,
        method: "solve",
        dist_final: dist,
        iterations: report.iterations,
        success: dist < cfg.success_threshold,
        wall_time: report.wall_time,
    }])
}

fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, u64, &'static str)> = rows
        .iter()
        .map(|r| (r.l, r.delta_or_snr.to_bits(), r.method))
        .collect();
    keys.sort_unstable();
    keys.dedup();

    keys.into_iter()
        .map(|(l, param_bits, method)| {
            let cell: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.l == l && r.delta_or_snr.to_bits() == param_bits && r.method == method)
                .collect();
            let mut dists: Vec<f64> = cell.iter().map(|r| r.dist_final).collect();
            dists.sort_by(f64::total_cmp);
            let mean_dist = dists.iter().sum::<f64>() / dists.len() as f64;
            let median_dist = dists[dists.len() / 2];
            let successes = cell.iter().filter(|r| r.success).count();
            let mut iter_success: Vec<usize> = cell
                .iter()
                .filter(|r| r.success)
                .map(|r| r.iterations)
                .collect();
            iter_success.sort_unstable();
            AggregateRow {
                l,
                delta_or_snr: f64::from_bits(param_bits),
                method,
                trials: cell.len(),
                mean_dist,
                median_dist,
                success_rate: successes as f64 / cell.len() as f64,
                median_iterations: iter_success
                    .get(iter_success.len() / 2)
                    .copied()
                    .unwrap_or(0),
            }
        })
        .collect()
}

fn write_outputs(
    cfg: &ExperimentConfig,
    rows: &[TrialRow],
    aggregates: &[AggregateRow],
) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;

    let config_json = serde_json::to_string_pretty(cfg).map_err(|e| FrogError::Numeric {
        what: format!("config serialization failed: {e}"),
    })?;
    fs::write(dir.join("config.json"), config_json + "\n")?;

    let mut results = String::from("l,delta_or_snr,trial,method,dist_final,iterations,success\n");
    for r in rows {
        writeln!(
            results,
            "{},{},{},{},{},{},{}",
            r.l, r.delta_or_snr, r.trial, r.method, r.dist_final, r.iterations, r.success
        )
        .expect("string write");
    }
    fs::write(dir.join("results.csv"), results)?;

    let mut aggr = String::from(
        "l,delta_or_snr,method,trials,mean_dist,median_dist,success_rate,median_iterations\n",
    );
    for a in aggregates {
        writeln!(
            aggr,
            "{},{},{},{},{},{},{},{}",
            a.l,
            a.delta_or_snr,
            a.method,
            a.trials,
            a.mean_dist,
            a.median_dist,
            a.success_rate,
            a.median_iterations
        )
        .expect("string write");
    }
    fs::write(dir.join("aggregates.csv"), aggr)?;

    // wall clock is inherently non-deterministic; quarantined in its own file
    let mut timings = String::from("l,delta_or_snr,trial,method,wall_time\n");
    for r in rows {
        writeln!(
            timings,
            "{},{},{},{},{}",
            r.l, r.delta_or_snr, r.trial, r.method, r.wall_time
        )
        .expect("string write");
    }
    fs::write(dir.join("timings.csv"), timings)?;
    Ok(())
}

/// Reads and validates an experiment config file (strict keys).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| FrogError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        what: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            n: 16,
            l_list: vec![1],
            delta_list: vec![0.0],
            snr_list: vec![],
            trials: 2,
            solver: SolverOverrides {
                max_iters: Some(600),
                ..Default::default()
            },
            init: InitOverrides::default(),
            output_dir: dir.to_path_buf(),
            master_seed: 7,
            success_threshold: 1e-6,
        }
    }

    #[test]
    fn success_rate_from_truth_always_succeeds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base(ExperimentKind::SuccessRate, dir.path());
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.rows.len(), 2);
        assert!(summary.rows.iter().all(|r| r.success));
        let agg = summary.aggregate(1, 0.0, "solve").unwrap();
        assert_eq!(agg.success_rate, 1.0);
        for file in ["config.json", "results.csv", "aggregates.csv", "timings.csv"] {
            assert!(dir.path().join(file).exists(), "{file}");
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg = base(ExperimentKind::InitCompare, dir_a.path());
        cfg.l_list = vec![1, 2];
        run_experiment(&cfg).unwrap();
        cfg.output_dir = dir_b.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        for file in ["results.csv", "aggregates.csv"] {
            let a = fs::read(dir_a.path().join(file)).unwrap();
            let b = fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between reruns");
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base(ExperimentKind::NoiseSweep, dir.path());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let text = r#"{"kind":"bench","n":16,"trials":1,"output_dir":"x","master_seed":1,"bogus":3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(ExperimentKind::SuccessRate, dir.path());
        cfg.l_list = vec![16];
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = base(ExperimentKind::SuccessRate, dir.path());
        cfg.delta_list.clear();
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = base(ExperimentKind::Bench, dir.path());
        cfg.trials = 0;
        assert!(run_experiment(&cfg).is_err());
    }
}
