//! Closed-form accuracy predictions for the least-squares range estimator.
//!
//! Under correct unwrapping the range error is Gaussian with variance
//! `sigma^2 / sum(lambda_n^-2)`. The probability that unwrapping is correct
//! equals the probability that the projected noise falls in the Voronoi cell
//! of the dual lattice; it is bounded above through the cell volume
//! (`det = 1/||v||`) and below through the inradius, both via the chi-square
//! distribution with N-1 degrees of freedom.

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::lattice::{LatticeContext, WavelengthSet};
use crate::real::{cast, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("chi-square argument must be nonnegative")]
    NegativeArgument,
    #[error("degrees of freedom must be positive")]
    ZeroDegrees,
    #[error("noise variance must be positive")]
    NonPositiveVariance,
    #[error("bound requires at least two wavelengths")]
    ZeroDimensional,
}

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
/// Accurate to ~1e-13 relative for arguments above 0.5.
pub fn ln_gamma<F: Real>(x: F) -> F {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    debug_assert!(x > F::zero());
    let half = cast::<F>(0.5);
    if x < half {
        // Reflection: ln|Gamma(x)| = ln(pi / sin(pi x)) - ln Gamma(1 - x).
        let pi = cast::<F>(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut acc = cast::<F>(0.99999999999980993);
    for (i, &c) in COEFFS.iter().enumerate() {
        acc = acc + cast::<F>(c) / (x + F::from_usize(i + 1).unwrap());
    }
    let t = x + cast::<F>(7.5);
    let ln_sqrt_2pi = cast::<F>(0.918938533204672741780329736406);
    ln_sqrt_2pi + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction otherwise;
/// absolute error well below 1e-12 in `f64`.
pub fn gamma_p<F: Real>(a: F, x: F) -> Result<F, AnalysisError> {
    if x < F::zero() {
        return Err(AnalysisError::NegativeArgument);
    }
    if a <= F::zero() {
        return Err(AnalysisError::ZeroDegrees);
    }
    if x.is_zero() {
        return Ok(F::zero());
    }
    let ln_prefix = a * x.ln() - x - ln_gamma(a);
    // Saturate far in the tails where exp would under/overflow.
    if ln_prefix < cast(-700.0) {
        return Ok(if x > a { F::one() } else { F::zero() });
    }
    let eps = cast::<F>(1e-16);
    let max_iter = 500;
    if x < a + F::one() {
        // P(a,x) = x^a e^-x / Gamma(a+1) * sum x^k / ((a+1)...(a+k))
        let mut term = F::one() / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..max_iter {
            denom = denom + F::one();
            term = term * x / denom;
            sum = sum + term;
            if term.abs() < sum.abs() * eps {
                break;
            }
        }
        Ok((ln_prefix.exp() * sum).min(F::one()))
    } else {
        // Q(a,x) via Lentz's continued fraction, then P = 1 - Q.
        let tiny = cast::<F>(1e-300);
        let mut b = x + F::one() - a;
        let mut c = F::one() / tiny;
        let mut d = F::one() / b;
        let mut h = d;
        for i in 1..max_iter {
            let fi = F::from_usize(i).unwrap();
            let an = -fi * (fi - a);
            b = b + cast::<F>(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = F::one() / d;
            let delta = d * c;
            h = h * delta;
            if (delta - F::one()).abs() < eps {
                break;
            }
        }
        Ok((F::one() - ln_prefix.exp() * h).max(F::zero()))
    }
}

/// Chi-square CDF with `n` degrees of freedom: `P(n/2, x/2)`.
pub fn chi_square_cdf<F: Real>(n: u32, x: F) -> Result<F, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroDegrees);
    }
    let a = F::from_u32(n).unwrap() / cast(2.0);
    gamma_p(a, x / cast(2.0))
}

/// Predicted mean-square range error under correct unwrapping:
/// `sigma^2 / sum(lambda_n^-2)`.
pub fn predicted_mse<F: Real>(ws: &WavelengthSet, sigma_sq: F) -> F {
    sigma_sq / ws.sum_inv_sq()
}

/// Upper bound on the probability that an (n-variate) normal vector lands in
/// the Voronoi cell of a lattice with the given determinant: the chi-square
/// mass of the ball of equal volume.
pub fn voronoi_prob_upper<F: Real>(n: u32, det: F, sigma_sq: F) -> Result<F, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroDimensional);
    }
    if sigma_sq <= F::zero() {
        return Err(AnalysisError::NonPositiveVariance);
    }
    let nf = F::from_u32(n).unwrap();
    let two = cast::<F>(2.0);
    let pi = cast::<F>(std::f64::consts::PI);
    let gamma_factor = (ln_gamma(nf / two + F::one()) * two / nf).exp();
    let arg = gamma_factor * det.powf(two / nf) / (pi * sigma_sq);
    chi_square_cdf(n, arg)
}

/// Upper bound on the probability of correct unwrapping: the Voronoi-cell
/// bound of the dual lattice, whose determinant is `1 / ||v||`.
///
/// With a single wavelength there is no unwrapping ambiguity beyond the
/// period, so the probability is 1.
pub fn prob_correct_upper<F: Real>(
    ctx: &LatticeContext<F>,
    sigma_sq: F,
) -> Result<F, AnalysisError> {
    let n = ctx.n();
    if n == 1 {
        return Ok(F::one());
    }
    if sigma_sq <= F::zero() {
        return Err(AnalysisError::NonPositiveVariance);
    }
    let dims = (n - 1) as u32;
    let nf = F::from_usize(n).unwrap();
    let two = cast::<F>(2.0);
    let half = cast::<F>(0.5);
    let dims_f = F::from_u32(dims).unwrap();
    let pi = cast::<F>(std::f64::consts::PI);
    // F_{N-1}( Gamma(N/2 + 1/2)^{2/(N-1)} / (||v||^{2/(N-1)} sigma^2 pi) )
    let v_norm_sq: F = cast(ctx.source().v_norm_sq().to_f64().unwrap_or(f64::MAX));
    let ln_norm = half * v_norm_sq.ln();
    let exponent = two / dims_f;
    let arg = (exponent * (ln_gamma(nf / two + half) - ln_norm)).exp() / (sigma_sq * pi);
    chi_square_cdf(dims, arg)
}

/// Lower bound on the probability of correct unwrapping from the inradius
/// `rho = d_min / 2`: `F_{N-1}(rho^2 / sigma^2)`.
pub fn prob_correct_lower<F: Real>(
    ctx: &LatticeContext<F>,
    sigma_sq: F,
) -> Result<F, AnalysisError> {
    inradius_bound(ctx, sigma_sq, false)
}

/// The inradius bound evaluated with the radius not squared, as sometimes
/// printed. Dimensionally inconsistent; kept for comparison only.
pub fn prob_correct_lower_unsquared<F: Real>(
    ctx: &LatticeContext<F>,
    sigma_sq: F,
) -> Result<F, AnalysisError> {
    inradius_bound(ctx, sigma_sq, true)
}

fn inradius_bound<F: Real>(
    ctx: &LatticeContext<F>,
    sigma_sq: F,
    unsquared: bool,
) -> Result<F, AnalysisError> {
    if sigma_sq <= F::zero() {
        return Err(AnalysisError::NonPositiveVariance);
    }
    let (_, d_min) = ctx
        .shortest_vector()
        .map_err(|_| AnalysisError::ZeroDimensional)?;
    let rho = d_min / cast(2.0);
    let arg = if unsquared { rho } else { rho * rho } / sigma_sq;
    chi_square_cdf((ctx.n() - 1) as u32, arg)
}

/// Bundle of the closed-form predictions at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPrediction<F: Real> {
    pub sigma_sq: F,
    pub mse_correct: F,
    pub p_correct_upper: F,
    pub p_correct_lower: F,
}

impl<F: Real> ErrorPrediction<F> {
    pub fn compute(ctx: &LatticeContext<F>, sigma_sq: F) -> Result<Self, AnalysisError> {
        let mse_correct = predicted_mse(ctx.source(), sigma_sq);
        let (p_correct_upper, p_correct_lower) = if ctx.n() == 1 {
            (F::one(), F::one())
        } else {
            (
                prob_correct_upper(ctx, sigma_sq)?,
                prob_correct_lower(ctx, sigma_sq)?,
            )
        };
        Ok(Self {
            sigma_sq,
            mse_correct,
            p_correct_upper,
            p_correct_lower,
        })
    }
}
