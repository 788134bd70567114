//! Least-squares range estimation from wrapped phase measurements.
//!
//! Phases are in cycles. A measurement vector `y` with entries in
//! `[-1/2, 1/2)` satisfies `y = r0 w + eps + zeta` where `w` holds the
//! reciprocal wavelengths, `eps` is noise and `zeta` collects the integer
//! wrapping variables. Estimation recovers a representative of the wrapping
//! class by a closest-point search in the dual lattice and then regresses
//! the range.

use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::exact::Integer;
use crate::lattice::{LatticeContext, WavelengthSet};
use crate::real::{cast, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("phase entry {0} outside [-1/2, 1/2)")]
    PhaseOutOfRange(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Wraps into `[-1/2, 1/2)`: subtracts the closest integer, half-integers
/// rounding up.
#[inline]
pub fn wrap<F: Real>(x: F) -> F {
    let half = cast::<F>(0.5);
    let w = x - (x + half).floor();
    // floor(x + 1/2) can land on the closed end through rounding.
    if w < -half {
        w + F::one()
    } else if w >= half {
        w - F::one()
    } else {
        w
    }
}

/// Closest integer with half-integers rounded up.
#[inline]
pub fn round_half_up<F: Real>(x: F) -> F {
    (x + cast::<F>(0.5)).floor()
}

/// A vector of wrapped phase measurements, entries in `[-1/2, 1/2)` cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector<F: Real>(Vec<F>);

impl<F: Real> PhaseVector<F> {
    /// Validates that every entry already lies in `[-1/2, 1/2)`.
    pub fn new(values: Vec<F>) -> Result<Self, EstimatorError> {
        let half = cast::<F>(0.5);
        for &v in &values {
            if !(v >= -half && v < half) {
                return Err(EstimatorError::PhaseOutOfRange(format!("{v}")));
            }
        }
        Ok(Self(values))
    }

    /// Wraps arbitrary raw phases into range.
    pub fn wrapped(raw: &[F]) -> Self {
        Self(raw.iter().map(|&x| wrap(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }
}

/// Output of the least-squares range estimator.
#[derive(Debug, Clone)]
pub struct RangeEstimate<F: Real> {
    /// Estimated range, reduced into `[0, P)`.
    pub r_hat: F,
    /// The recovered wrapping-variable representative.
    pub zeta_hat: Vec<Integer>,
    /// Minimized value of the projected quadratic form.
    pub residual: F,
}

/// Least-squares range estimate: recovers the wrapping variables by a
/// closest-point search, then regresses `r = (y - zeta)'w / w'w` and reduces
/// modulo the identifiable period `P`.
pub fn estimate_range<F: Real>(y: &PhaseVector<F>, ctx: &LatticeContext<F>) -> RangeEstimate<F> {
    assert_eq!(
        y.len(),
        ctx.n(),
        "phase vector and context must share the wavelength count"
    );
    let zeta_hat = ctx.closest_point(y.as_slice());
    let w: Vec<F> = ctx.source().reciprocals();
    let mut num = F::zero();
    let mut den = F::zero();
    for ((&yi, zi), &wi) in y.as_slice().iter().zip(&zeta_hat).zip(&w) {
        let diff = yi - cast::<F>(zi.to_f64().unwrap_or(f64::MAX));
        num = num + diff * wi;
        den = den + wi * wi;
    }
    let raw = num / den;
    let period: F = ctx.source().period_real();
    let mut r_hat = raw - period * (raw / period).floor();
    // Guard against the floor landing exactly on P through rounding.
    if r_hat >= period {
        r_hat = r_hat - period;
    }
    if r_hat < F::zero() {
        r_hat = r_hat + period;
    }
    let residual = ctx.dual().projected_dist_sq(y.as_slice(), &zeta_hat);
    RangeEstimate {
        r_hat,
        zeta_hat,
        residual,
    }
}

/// Whether an estimated wrapping vector is correct: `zeta_hat - zeta_true`
/// must be an integer multiple of `v`, tested exactly.
pub fn unwrap_correct(
    zeta_hat: &[Integer],
    zeta_true: &[Integer],
    ws: &WavelengthSet,
) -> Result<bool, EstimatorError> {
    if zeta_hat.len() != zeta_true.len() || zeta_hat.len() != ws.len() {
        return Err(EstimatorError::LengthMismatch {
            expected: ws.len(),
            got: zeta_hat.len().min(zeta_true.len()),
        });
    }
    let v = ws.v();
    let delta: Vec<Integer> = zeta_hat
        .iter()
        .zip(zeta_true.iter())
        .map(|(a, b)| a - b)
        .collect();
    // v is strictly positive for a wavelength set; anchor k on the first entry.
    let k = &delta[0] / &v[0];
    if (&delta[0] % &v[0]) != Integer::zero() {
        return Ok(false);
    }
    Ok(delta.iter().zip(v.iter()).all(|(d, vi)| d == &(vi * &k)))
}

/// Wrapped range error `P * wrap((r_hat - r0) / P)`, the signed distance on
/// the circle of circumference `P`.
pub fn wrapped_error<F: Real>(r_hat: F, r0: F, period: F) -> F {
    period * wrap((r_hat - r0) / period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;
    use crate::lattice::WavelengthSet;
    use proptest::prelude::*;

    fn ws(tokens: &[&str]) -> WavelengthSet {
        WavelengthSet::new(tokens.iter().map(|t| parse_rational(t).unwrap()).collect()).unwrap()
    }

    fn ctx(tokens: &[&str]) -> LatticeContext<f64> {
        LatticeContext::new(ws(tokens))
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(0.5f64), -0.5);
        assert_eq!(wrap(0.3f64), 0.3);
        assert!((wrap(-1.2f64) - (-0.2)).abs() < 1e-12);
        assert_eq!(wrap(1.5f64), -0.5);
        assert_eq!(wrap(-0.5f64), -0.5);
    }

    #[test]
    fn noise_free_recovery_at_seven() {
        let c = ctx(&["2", "3", "5"]);
        let r0 = 7.0;
        let raw: Vec<f64> = c.source().lambdas_real::<f64>().iter().map(|l| r0 / l).collect();
        let y = PhaseVector::wrapped(&raw);
        let est = estimate_range(&y, &c);
        assert!((est.r_hat - 7.0).abs() < 1e-9);
        assert!(est.residual < 1e-18);
    }

    #[test]
    fn range_is_identifiable_mod_period() {
        let c = ctx(&["2", "3", "5"]);
        let eps = [0.01, -0.02, 0.005];
        let lambdas: Vec<f64> = c.source().lambdas_real();
        let make = |r0: f64| {
            let raw: Vec<f64> = lambdas
                .iter()
                .zip(eps.iter())
                .map(|(l, e)| r0 / l + e)
                .collect();
            estimate_range(&PhaseVector::wrapped(&raw), &c).r_hat
        };
        let a = make(7.25);
        let b = make(7.25 + 30.0);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unwrap_correct_classes() {
        let set = ws(&["2", "3", "5"]);
        let zeta: Vec<Integer> = [-4i64, -2, -1].iter().map(|&x| Integer::from(x)).collect();
        let v = set.v().to_vec();
        let plus_v: Vec<Integer> = zeta.iter().zip(v.iter()).map(|(z, vi)| z + vi).collect();
        let mut off = zeta.clone();
        off[0] += 1;
        assert!(unwrap_correct(&zeta, &zeta, &set).unwrap());
        assert!(unwrap_correct(&plus_v, &zeta, &set).unwrap());
        assert!(!unwrap_correct(&off, &zeta, &set).unwrap());
        assert!(unwrap_correct(&zeta[..2], &zeta, &set).is_err());
    }

    #[test]
    fn zero_noise_grid_recovery() {
        let c = ctx(&["2", "3", "5"]);
        let period = 30.0;
        let lambdas: Vec<f64> = c.source().lambdas_real();
        for i in 0..200 {
            let r0 = period * (i as f64) / 200.0;
            let raw: Vec<f64> = lambdas.iter().map(|l| r0 / l).collect();
            let est = estimate_range(&PhaseVector::wrapped(&raw), &c);
            let err = wrapped_error(est.r_hat, r0, period);
            assert!(err.abs() <= 1e-9 * period, "r0={r0} err={err}");
        }
    }

    #[test]
    fn scale_equivariance() {
        let c1 = ctx(&["2", "3", "5"]);
        let c2 = ctx(&["4", "6", "10"]);
        let r0 = 11.3;
        let eps = [0.004, -0.007, 0.002];
        let y1: Vec<f64> = c1
            .source()
            .lambdas_real::<f64>()
            .iter()
            .zip(eps.iter())
            .map(|(l, e)| r0 / l + e)
            .collect();
        let y2: Vec<f64> = c2
            .source()
            .lambdas_real::<f64>()
            .iter()
            .zip(eps.iter())
            .map(|(l, e)| 2.0 * r0 / l + e)
            .collect();
        let e1 = estimate_range(&PhaseVector::wrapped(&y1), &c1);
        let e2 = estimate_range(&PhaseVector::wrapped(&y2), &c2);
        assert!((2.0 * e1.r_hat - e2.r_hat).abs() < 1e-9);
    }

    #[test]
    fn phase_vector_validation() {
        assert!(PhaseVector::new(vec![0.49f64, -0.5]).is_ok());
        assert!(PhaseVector::new(vec![0.5f64]).is_err());
        assert!(PhaseVector::new(vec![-0.51f64]).is_err());
    }

    proptest! {
        #[test]
        fn wrap_is_into_range_and_idempotent(x in -1e6f64..1e6) {
            let w = wrap(x);
            prop_assert!((-0.5..0.5).contains(&w));
            prop_assert_eq!(wrap(w), w);
        }

        #[test]
        fn integer_shift_invariance(
            r0 in 0.0f64..30.0,
            shift in proptest::collection::vec(-5i64..=5, 3),
            eps in proptest::collection::vec(-0.05f64..0.05, 3),
        ) {
            let c = ctx(&["2", "3", "5"]);
            let lambdas: Vec<f64> = c.source().lambdas_real();
            let raw: Vec<f64> = lambdas
                .iter()
                .zip(eps.iter())
                .map(|(l, e)| r0 / l + e)
                .collect();
            let shifted: Vec<f64> = raw
                .iter()
                .zip(shift.iter())
                .map(|(x, &s)| x + s as f64)
                .collect();
            let a = estimate_range(&PhaseVector::wrapped(&raw), &c);
            let b = estimate_range(&PhaseVector::wrapped(&shifted), &c);
            prop_assert!((a.r_hat - b.r_hat).abs() < 1e-9);
        }
    }
}
