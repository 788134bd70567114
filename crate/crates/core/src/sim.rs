//! Deterministic Monte-Carlo harness for the range estimator.
//!
//! Each trial draws i.i.d. Gaussian phase noise, forms the wrapped phase
//! vector, runs the estimator and scores the wrapped range error and
//! whether the wrapping variables were recovered correctly (tested exactly
//! against the true ones, which are computed from the same noise draw).
//!
//! Reproducibility contract: per-trial RNG streams are derived from
//! `(seed, variance index, trial index)` alone, trials are reduced in fixed
//! chunks with compensated summation, and chunk totals are combined in
//! chunk order. Output is therefore bit-identical for any worker count.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{predicted_mse, prob_correct_upper};
use crate::estimator::{estimate_range, round_half_up, unwrap_correct, wrap, wrapped_error, PhaseVector};
use crate::exact::Integer;
use crate::lattice::LatticeContext;
use crate::real::Real;
use crate::WavelengthSet;

/// Trials per reduction chunk; fixed so partitioning never depends on the
/// worker count.
const CHUNK: u64 = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("noise variances must be positive and finite")]
    BadVariance,
    #[error("r0 must be finite")]
    BadRange,
}

/// Inputs of a noise-variance sweep.
#[derive(Debug, Clone)]
pub struct SimConfig {
    wavelengths: WavelengthSet,
    r0: f64,
    sigma_sq_grid: Vec<f64>,
    trials: u64,
    seed: u64,
}

impl SimConfig {
    /// Validates and canonicalizes: `r0` is reduced modulo the identifiable
    /// period into `[0, P)`.
    pub fn new(
        wavelengths: WavelengthSet,
        r0: f64,
        sigma_sq_grid: Vec<f64>,
        trials: u64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if trials == 0 {
            return Err(SimError::NoTrials);
        }
        if sigma_sq_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(SimError::BadVariance);
        }
        if !r0.is_finite() {
            return Err(SimError::BadRange);
        }
        let period: f64 = wavelengths.period_real();
        let mut r0 = r0 - period * (r0 / period).floor();
        if r0 >= period || r0 < 0.0 {
            r0 = 0.0;
        }
        Ok(Self {
            wavelengths,
            r0,
            sigma_sq_grid,
            trials,
            seed,
        })
    }

    pub fn wavelengths(&self) -> &WavelengthSet {
        &self.wavelengths
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn sigma_sq_grid(&self) -> &[f64] {
        &self.sigma_sq_grid
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One row of a sweep: sample statistics plus the closed-form values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma_sq: f64,
    pub sample_mse: f64,
    pub predicted_mse: f64,
    pub correct_rate: f64,
    pub p_upper: f64,
    pub trials: u64,
}

/// Draws `wrap(N(0, sigma^2))`, a wrapped-normal phase noise sample.
pub fn sample_wrapped_normal<F, R>(sigma: F, rng: &mut R) -> F
where
    F: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<F>,
{
    let e: F = rng.sample(StandardNormal);
    wrap(sigma * e)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based per-trial stream: mixing is a pure function of the three
/// indices, so execution order is irrelevant.
fn trial_rng(seed: u64, sigma_idx: u64, trial: u64) -> ChaCha8Rng {
    let mut state = splitmix64(seed);
    state = splitmix64(state ^ sigma_idx.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    state = splitmix64(state ^ trial.wrapping_mul(0xA076_1D64_78BD_642F));
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[inline]
fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Runs the sweep: for every variance in the grid, `trials` independent
/// trials scoring squared wrapped error and exact unwrap correctness.
/// Parallelism (the ambient rayon pool) cannot change the output.
pub fn run_sweep(cfg: &SimConfig, ctx: &LatticeContext<f64>) -> Vec<SweepRow> {
    assert_eq!(
        cfg.wavelengths, *ctx.source(),
        "context must be built from the sweep's wavelength set"
    );
    let lambdas: Vec<f64> = cfg.wavelengths.lambdas_real();
    let period: f64 = cfg.wavelengths.period_real();
    let n_chunks = cfg.trials.div_ceil(CHUNK);

    cfg.sigma_sq_grid
        .iter()
        .enumerate()
        .map(|(sigma_idx, &sigma_sq)| {
            let sigma = sigma_sq.sqrt();
            let chunk_stats: Vec<(f64, u64)> = (0..n_chunks)
                .into_par_iter()
                .map(|chunk| {
                    let lo = chunk * CHUNK;
                    let hi = (lo + CHUNK).min(cfg.trials);
                    let mut sum = 0.0;
                    let mut comp = 0.0;
                    let mut n_correct = 0u64;
                    for trial in lo..hi {
                        let mut rng = trial_rng(cfg.seed, sigma_idx as u64, trial);
                        let (sq_err, correct) =
                            run_trial(cfg, ctx, &lambdas, period, sigma, &mut rng);
                        neumaier_add(&mut sum, &mut comp, sq_err);
                        n_correct += u64::from(correct);
                    }
                    (sum + comp, n_correct)
                })
                .collect();

            // Combine in chunk order with the same compensated sum.
            let mut total = 0.0;
            let mut comp = 0.0;
            let mut n_correct = 0u64;
            for (s, k) in chunk_stats {
                neumaier_add(&mut total, &mut comp, s);
                n_correct += k;
            }
            let sample_mse = (total + comp) / cfg.trials as f64;
            let correct_rate = n_correct as f64 / cfg.trials as f64;
            SweepRow {
                sigma_sq,
                sample_mse,
                predicted_mse: predicted_mse(&cfg.wavelengths, sigma_sq),
                correct_rate,
                p_upper: prob_correct_upper(ctx, sigma_sq).unwrap_or(1.0),
                trials: cfg.trials,
            }
        })
        .collect()
}

fn run_trial(
    cfg: &SimConfig,
    ctx: &LatticeContext<f64>,
    lambdas: &[f64],
    period: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, bool) {
    let n = lambdas.len();
    let mut raw = Vec::with_capacity(n);
    let mut zeta_true = Vec::with_capacity(n);
    for lambda in lambdas.iter().take(n) {
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        let t = cfg.r0 / lambda + e;
        raw.push(t);
        zeta_true.push(Integer::from(-(round_half_up(t) as i64)));
    }
    let y = PhaseVector::wrapped(&raw);
    let est = estimate_range(&y, ctx);
    let err = wrapped_error(est.r_hat, cfg.r0, period);
    let correct = unwrap_correct(&est.zeta_hat, &zeta_true, &cfg.wavelengths)
        .expect("lengths match by construction");
    (err * err, correct)
}
