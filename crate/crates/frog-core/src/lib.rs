//! Pulse retrieval from second-harmonic-generation FROG traces.
//!
//! An SHG-FROG apparatus records, for a set of delays, the squared Fourier
//! magnitude of a pulse multiplied by a delayed copy of itself. This crate
//! recovers the complex pulse from that intensity data by minimizing a
//! smoothed amplitude least-squares objective with a block stochastic
//! gradient method, starting from an alternating spectral initialization.
//!
//! The main entry points are:
//!
//! - [`synthesize_trace`] / [`trace_distance`]: the forward model and the
//!   ambiguity-invariant reconstruction error,
//! - [`spectral_init`]: the alternating spectral initializer (with a
//!   ptychography-style starting vector as fallback/baseline),
//! - [`bsga_solve`]: the block stochastic gradient refinement loop,
//! - [`generate_pulse`] / [`add_noise`]: seeded test-signal synthesis,
//! - [`io`]: the CSV/JSON file formats shared with the CLI.
//!
//! All signals are periodic (indices wrap modulo the grid size) and all
//! randomness flows through explicitly seeded generators, so every pipeline
//! in this crate is reproducible bit-for-bit given the same inputs.

pub mod error;
pub mod fft;
pub mod init;
pub mod interp;
pub mod io;
pub mod objective;
pub mod pulse;
pub mod signal;
pub mod solver;
pub mod trace;

pub use error::{FrogError, Result};
pub use init::{
    assemble_x0, build_g, init_l1, init_lgt1, leading_eigvec, proximal_solve, ptych_start,
    spectral_init, upsample_trace, DiagonalEstimate, EigenResult, GMatrix, InitConfig, InitResult,
    Interpolation,
};
pub use objective::{
    block_gradient, full_gradient, loss, phi_mu, sample_block, AmplitudeTarget, BlockIndexSet,
};
pub use pulse::{apply_ambiguity, Ambiguity, Pulse};
pub use signal::{add_noise, add_noise_with_stats, generate_pulse, NoiseStats, PulseSpec, PULSE_ENERGY};
pub use solver::{bsga_solve, perturbed_start, SolveReport, SolverConfig, Termination};
pub use trace::{synthesize_trace, trace_distance, transform_trace, FrogTrace, SqrtTrace, TransformedTrace};
