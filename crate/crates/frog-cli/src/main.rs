//! `frog`: synthesize FROG traces, recover pulses, and run the seeded
//! experiment suites.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 solve stopped at the
//! iteration cap (or diverged), 3 I/O error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use frog_cli::experiments::{
    load_config, run_experiment, ExperimentConfig, ExperimentKind, InitOverrides, SolverOverrides,
    DEFAULT_SUCCESS_THRESHOLD,
};
use frog_core::signal::stream_id;
use frog_core::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frog", version, about = "SHG-FROG pulse retrieval toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random bandlimited pulse and its FROG trace
    Synth(SynthArgs),
    /// Recover a pulse from a trace file
    Solve(SolveArgs),
    /// Success rate of solves started at perturbed copies of the truth
    SuccessRate(ExperimentArgs),
    /// Relative error of the ptych start vs the spectral initializer
    InitCompare(ExperimentArgs),
    /// Full init+solve pipeline across an SNR grid
    NoiseSweep(ExperimentArgs),
    /// Iteration counts to a target error on noiseless data
    Bench(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Grid size N
    #[arg(long)]
    n: usize,
    /// Delay stride L
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for pulse.csv and trace.csv
    #[arg(long)]
    out: PathBuf,
    /// Spectral support size B (default ceil((N-1)/2))
    #[arg(long)]
    bandlimit: Option<usize>,
    /// Uniqueness-regime ensemble (B = floor(N/2))
    #[arg(long, conflicts_with = "bandlimit")]
    theory: bool,
    /// Gaussian center bin (default N/4)
    #[arg(long)]
    center: Option<usize>,
    /// Gaussian width in bins (default N/8)
    #[arg(long)]
    width: Option<f64>,
    /// Corrupt the trace with white noise at this SNR (dB)
    #[arg(long)]
    snr: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InitMode {
    /// Alternating spectral initialization (stride-aware)
    Spectral,
    /// Frequency-summed trace rows with random phases
    Ptych,
    /// Seeded complex Gaussian vector
    Random,
    /// Read the start from --init-file
    File,
}

#[derive(Args)]
struct SolveArgs {
    /// Input trace CSV
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = InitMode::Spectral)]
    init: InitMode,
    /// Starting pulse CSV for --init file
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// Ground-truth pulse CSV; enables the error trajectory in the report
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Where to write the solve report
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// Optionally write the recovered pulse as CSV
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// JSON-lines file for per-iteration initializer diagnostics
    #[arg(long)]
    init_diag: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,

    // solver knobs (defaults per the published protocol)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    /// Block cardinality Q (default N)
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Return the tail-averaged iterate when the cap is reached
    #[arg(long)]
    tail_average: bool,
    /// Extra termination test on the full gradient norm
    #[arg(long)]
    full_gradient_termination: bool,

    // initializer knobs
    #[arg(long, default_value_t = 2)]
    t: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = InterpArg::Cubic)]
    interp: InterpArg,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InterpArg {
    Cubic,
    Lowpass,
}

impl From<InterpArg> for Interpolation {
    fn from(v: InterpArg) -> Self {
        match v {
            InterpArg::Cubic => Interpolation::Cubic,
            InterpArg::Lowpass => Interpolation::Lowpass,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; inline flags --seed/--out override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Delay strides, comma separated
    #[arg(long, value_delimiter = ',')]
    l: Vec<usize>,
    /// Perturbation amplitudes (success-rate), comma separated
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// SNR grid in dB, comma separated ("inf" for noiseless)
    #[arg(long, value_delimiter = ',')]
    snr: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Success threshold on the relative error
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tail_average: Option<bool>,
    /// Initializer iterations T
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

impl ExperimentArgs {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig {
                kind,
                n: self.n.ok_or_else(|| FrogError::InvalidParameter {
                    what: "--n is required without --config".into(),
                })?,
                l_list: if self.l.is_empty() { vec![1] } else { self.l.clone() },
                delta_list: self.delta.clone(),
                snr_list: self.snr.clone(),
                trials: self.trials.ok_or_else(|| FrogError::InvalidParameter {
                    what: "--trials is required without --config".into(),
                })?,
                solver: SolverOverrides::default(),
                init: InitOverrides::default(),
                output_dir: PathBuf::new(),
                master_seed: 0,
                success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            },
        };
        cfg.kind = kind;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = self.out {
            cfg.output_dir = out;
        }
        if cfg.output_dir.as_os_str().is_empty() {
            return Err(FrogError::InvalidParameter {
                what: "--out is required without --config".into(),
            });
        }
        if let Some(v) = self.threshold {
            cfg.success_threshold = v;
        }
        if let Some(v) = self.alpha {
            cfg.solver.alpha = Some(v);
        }
        if let Some(v) = self.mu0 {
            cfg.solver.mu0 = Some(v);
        }
        if let Some(v) = self.q {
            cfg.solver.block_size = Some(v);
        }
        if let Some(v) = self.epsilon {
            cfg.solver.epsilon = Some(v);
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iters = Some(v);
        }
        if let Some(v) = self.tail_average {
            cfg.solver.tail_average = Some(v);
        }
        if let Some(v) = self.t {
            cfg.init.iterations = Some(v);
        }
        if let Some(v) = self.lambda {
            cfg.init.lambda = Some(v);
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                FrogError::Io(_) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Solve(args) => cmd_solve(args),
        Command::SuccessRate(args) => cmd_experiment(args, ExperimentKind::SuccessRate),
        Command::InitCompare(args) => cmd_experiment(args, ExperimentKind::InitCompare),
        Command::NoiseSweep(args) => cmd_experiment(args, ExperimentKind::NoiseSweep),
        Command::Bench(args) => cmd_experiment(args, ExperimentKind::Bench),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let mut spec = if args.theory {
        PulseSpec::theory(args.n, args.seed)
    } else {
        PulseSpec::paper(args.n, args.seed)
    };
    if let Some(b) = args.bandlimit {
        spec.bandlimit = b;
    }
    if let Some(c) = args.center {
        spec.spectral_center = c;
    }
    if let Some(w) = args.width {
        spec.spectral_width = w;
    }
    let pulse = generate_pulse(&spec)?;
    let mut trace = synthesize_trace(&pulse, args.l)?;
    if let Some(snr) = args.snr {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(stream_id::NOISE);
        trace = add_noise(&trace, snr, &mut rng)?;
    }
    std::fs::create_dir_all(&args.out)?;
    io::write_pulse_csv(args.out.join("pulse.csv"), &pulse)?;
    io::write_trace_csv(args.out.join("trace.csv"), &trace)?;
    println!(
        "N={} L={} R={} -> {}",
        trace.n(),
        trace.stride(),
        trace.delays(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let trace = io::read_trace_csv(&args.trace)?;
    let n = trace.n();
    let truth = args.truth.as_ref().map(io::read_pulse_csv).transpose()?;

    let init_cfg = InitConfig {
        iterations: args.t,
        lambda: args.lambda,
        seed: args.seed,
        interpolation: args.interp.into(),
        ..InitConfig::default()
    };
    let x0 = match args.init {
        InitMode::Spectral => {
            let init = spectral_init(&trace, &init_cfg)?;
            if let Some(path) = &args.init_diag {
                let mut lines = String::new();
                for diag in &init.diagnostics {
                    lines.push_str(&serde_json::to_string(diag).map_err(|e| {
                        FrogError::Numeric {
                            what: format!("diagnostic serialization failed: {e}"),
                        }
                    })?);
                    lines.push('\n');
                }
                std::fs::write(path, lines)?;
            }
            init.pulse
        }
        InitMode::Ptych => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rng.set_stream(stream_id::PTYCH);
            ptych_start(&trace, &mut rng)
        }
        InitMode::Random => {
            // uniform complex entries scaled to the generator's design energy
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rng.set_stream(stream_id::PTYCH);
            let sigma = (PULSE_ENERGY / n as f64).sqrt();
            Pulse::new(
                (0..n)
                    .map(|_| {
                        Complex64::new(
                            sigma * (2.0 * rng.gen::<f64>() - 1.0),
                            sigma * (2.0 * rng.gen::<f64>() - 1.0),
                        )
                    })
                    .collect(),
            )?
        }
        InitMode::File => {
            let path = args.init_file.as_ref().ok_or_else(|| {
                FrogError::InvalidParameter {
                    what: "--init file requires --init-file".into(),
                }
            })?;
            io::read_pulse_csv(path)?
        }
    };

    let mut solver = SolverConfig::defaults(n);
    solver.seed = args.seed;
    if let Some(v) = args.alpha {
        solver.alpha = v;
    }
    if let Some(v) = args.gamma {
        solver.gamma = v;
    }
    if let Some(v) = args.gamma1 {
        solver.gamma1 = v;
    }
    if let Some(v) = args.mu0 {
        solver.mu0 = v;
    }
    if let Some(v) = args.q {
        solver.block_size = v;
    }
    if let Some(v) = args.epsilon {
        solver.epsilon = v;
    }
    if let Some(v) = args.max_iters {
        solver.max_iters = v;
    }
    solver.tail_average = args.tail_average;
    solver.full_gradient_termination = args.full_gradient_termination;

    let report = bsga_solve(&trace, &x0, &solver, truth.as_ref())?;
    io::write_report_json(&args.report, &report)?;
    if let Some(path) = &args.estimate {
        io::write_pulse_csv(path, &report.estimate)?;
    }
    let grad = report.grad_norm_trajectory.last().copied().unwrap_or(f64::NAN);
    match report.final_dist() {
        Some(dist) => println!(
            "{:?} after {} iterations, grad={grad:.3e}, dist={dist:.3e} -> {}",
            report.termination,
            report.iterations,
            args.report.display()
        ),
        None => println!(
            "{:?} after {} iterations, grad={grad:.3e} -> {}",
            report.termination,
            report.iterations,
            args.report.display()
        ),
    }
    Ok(match report.termination {
        Termination::ToleranceMet => 0,
        Termination::IterCap => 2,
    })
}

fn cmd_experiment(args: ExperimentArgs, kind: ExperimentKind) -> Result<u8> {
    let cfg = args.into_config(kind)?;
    let summary = run_experiment(&cfg)?;
    println!(
        "{} rows -> {}",
        summary.rows.len(),
        summary.output_dir.display()
    );
    for a in &summary.aggregates {
        println!(
            "L={} param={} method={} trials={} mean_dist={:.3e} median_dist={:.3e} success={:.2} median_iters={}",
            a.l,
            a.delta_or_snr,
            a.method,
            a.trials,
            a.mean_dist,
            a.median_dist,
            a.success_rate,
            a.median_iterations
        );
    }
    Ok(0)
}
