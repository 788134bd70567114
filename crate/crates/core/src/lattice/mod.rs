//! Wavelength sets and the dual lattice their unwrapping problem lives in.
//!
//! A set of N positive rational wavelengths determines the least common
//! multiple `P`, the integer vector `v` with `v_n = P / lambda_n`
//! (jointly relatively prime by minimality of `P`), and the projection
//! `Q = I - v v' / ||v||^2` onto the hyperplane orthogonal to `v`. The
//! image `{Q z : z in Z^N}` is an (N-1)-dimensional lattice with
//! determinant `1 / ||v||`; recovering the wrapping variables of a phase
//! vector is a closest-point problem in that lattice.

mod enumerate;
mod reduce;
mod unimodular;

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::exact::{gcd_all, rational_lcm, to_real, Integer, Rational};
use crate::real::{cast, Real};
use reduce::dot;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("wavelength set must be nonempty")]
    Empty,
    #[error("wavelengths must be positive")]
    NonPositiveWavelength,
    #[error("vector entries must be jointly relatively prime")]
    NotPrimitive,
    #[error("zero-dimensional lattice")]
    ZeroDimensional,
}

/// N positive rational wavelengths with their least common multiple `P` and
/// the derived integer vector `v = P / lambda`. Immutable after
/// construction; `v` is always jointly relatively prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavelengthSet {
    lambdas: Vec<Rational>,
    period: Rational,
    v: Vec<Integer>,
}

impl WavelengthSet {
    pub fn new(lambdas: Vec<Rational>) -> Result<Self, LatticeError> {
        if lambdas.is_empty() {
            return Err(LatticeError::Empty);
        }
        if lambdas.iter().any(|l| !l.is_positive()) {
            return Err(LatticeError::NonPositiveWavelength);
        }
        let period = rational_lcm(&lambdas).expect("positive nonempty input");
        let v: Vec<Integer> = lambdas
            .iter()
            .map(|l| {
                let q = &period / l;
                debug_assert!(q.is_integer(), "P / lambda integral by lcm construction");
                q.to_integer()
            })
            .collect();
        debug_assert_eq!(
            gcd_all(&v).expect("positive entries"),
            Integer::one(),
            "gcd(v) = 1 by minimality of the lcm"
        );
        Ok(Self { lambdas, period, v })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lambdas(&self) -> &[Rational] {
        &self.lambdas
    }

    /// The least common multiple `P`: ranges are identifiable modulo `P`.
    pub fn period(&self) -> &Rational {
        &self.period
    }

    pub fn v(&self) -> &[Integer] {
        &self.v
    }

    pub fn v_norm_sq(&self) -> Integer {
        self.v.iter().map(|x| x * x).sum()
    }

    /// Reciprocal wavelengths `w_n = 1 / lambda_n` in the working scalar.
    pub fn reciprocals<F: Real>(&self) -> Vec<F> {
        self.lambdas.iter().map(|l| to_real(&l.recip())).collect()
    }

    pub fn lambdas_real<F: Real>(&self) -> Vec<F> {
        self.lambdas.iter().map(to_real).collect()
    }

    pub fn period_real<F: Real>(&self) -> F {
        to_real(&self.period)
    }

    /// `sum(lambda_n^-2)` evaluated from the exact identity
    /// `||v||^2 / P^2`.
    pub fn sum_inv_sq<F: Real>(&self) -> F {
        let exact = Rational::from_integer(self.v_norm_sq())
            / (self.period.clone() * self.period.clone());
        to_real(&exact)
    }
}

impl std::fmt::Display for WavelengthSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.lambdas.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

/// The dual lattice `{Q z : z in Z^N}` of a primitive integer vector `v`,
/// with exact structural data and the floating-point machinery used by the
/// decoders. Immutable and safe to share between threads.
#[derive(Debug, Clone)]
pub struct DualLattice<F: Real> {
    v: Vec<Integer>,
    v_f: Vec<F>,
    v_norm_sq: Integer,
    v_norm_sq_f: F,
    /// Exact dual basis, column-major N x (N-1); every column is orthogonal
    /// to `v` in rational arithmetic.
    basis_exact: Vec<Vec<Rational>>,
    /// Floating-point mirror of `basis_exact`.
    basis_f: Vec<Vec<F>>,
    /// Integer vectors realizing each basis column: `basis_exact[j] = Q zcols[j]`.
    zcols: Vec<Vec<Integer>>,
    /// Upper-triangular factor of `basis_f` in orthonormal coordinates.
    rmat: Vec<Vec<F>>,
    /// Orthonormal columns spanning the hyperplane orthogonal to `v`.
    wmat: Vec<Vec<F>>,
}

impl<F: Real> DualLattice<F> {
    /// Builds the dual lattice with LLL preprocessing of the basis.
    pub fn new(v: Vec<Integer>) -> Result<Self, LatticeError> {
        Self::build(v, true)
    }

    /// Same lattice, no basis reduction. Decoding results must agree with
    /// the reduced path; reduction is purely a performance aid.
    pub fn without_reduction(v: Vec<Integer>) -> Result<Self, LatticeError> {
        Self::build(v, false)
    }

    fn build(v: Vec<Integer>, reduce: bool) -> Result<Self, LatticeError> {
        if v.is_empty() {
            return Err(LatticeError::Empty);
        }
        match gcd_all(&v.iter().map(|x| x.abs()).collect::<Vec<_>>()) {
            Ok(g) if g.is_one() => {}
            _ => return Err(LatticeError::NotPrimitive),
        }
        let n = v.len();
        let v_norm_sq: Integer = v.iter().map(|x| x * x).sum();
        let v_f: Vec<F> = v.iter().map(|x| cast(x.to_f64().unwrap_or(f64::MAX))).collect();
        let v_norm_sq_f = to_real(&Rational::from_integer(v_norm_sq.clone()));

        if n == 1 {
            // Zero-dimensional dual lattice; the projection is identically 0.
            return Ok(Self {
                v,
                v_f,
                v_norm_sq,
                v_norm_sq_f,
                basis_exact: Vec::new(),
                basis_f: Vec::new(),
                zcols: Vec::new(),
                rmat: Vec::new(),
                wmat: Vec::new(),
            });
        }

        // Complete v to a unimodular matrix; the projections of its trailing
        // columns are a basis of the dual lattice.
        let completion = unimodular::complete_primitive(&v);
        let u_cols: Vec<Vec<Integer>> = completion[1..].to_vec();
        let project_exact = |z: &[Integer]| -> Vec<Rational> {
            let vz: Integer = v.iter().zip(z).map(|(a, b)| a * b).sum();
            let scale = Rational::new(vz, v_norm_sq.clone());
            v.iter()
                .zip(z)
                .map(|(vi, zi)| Rational::from_integer(zi.clone()) - &scale * vi)
                .collect()
        };

        let mut basis_f: Vec<Vec<F>> = u_cols
            .iter()
            .map(|z| project_exact(z).iter().map(to_real).collect())
            .collect();

        let zcols: Vec<Vec<Integer>> = if reduce {
            let t = reduce::lll(&mut basis_f, 0.75);
            // Map the transform back to integer representatives.
            (0..t.len())
                .map(|j| {
                    (0..n)
                        .map(|i| {
                            t[j].iter()
                                .enumerate()
                                .map(|(l, &tlj)| &u_cols[l][i] * Integer::from(tlj))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        } else {
            u_cols
        };

        // Recompute the exact basis from the (possibly reduced) integer
        // representatives, then mirror it so exact and float views match.
        let basis_exact: Vec<Vec<Rational>> = zcols.iter().map(|z| project_exact(z)).collect();
        let basis_f: Vec<Vec<F>> = basis_exact
            .iter()
            .map(|col| col.iter().map(to_real).collect())
            .collect();

        // Modified Gram-Schmidt QR of the mirror basis.
        let k = basis_f.len();
        let mut wmat: Vec<Vec<F>> = Vec::with_capacity(k);
        let mut rmat: Vec<Vec<F>> = vec![vec![F::zero(); k]; k];
        for j in 0..k {
            let mut col = basis_f[j].clone();
            for (i, w) in wmat.iter().enumerate() {
                let rij = dot(w, &col);
                rmat[i][j] = rij;
                for (c, &wi) in col.iter_mut().zip(w.iter()) {
                    *c = *c - rij * wi;
                }
            }
            let norm = dot(&col, &col).sqrt();
            debug_assert!(norm > F::zero(), "dual basis columns are independent");
            rmat[j][j] = norm;
            for c in col.iter_mut() {
                *c = *c / norm;
            }
            wmat.push(col);
        }

        Ok(Self {
            v,
            v_f,
            v_norm_sq,
            v_norm_sq_f,
            basis_exact,
            basis_f,
            zcols,
            rmat,
            wmat,
        })
    }

    /// Ambient dimension N.
    pub fn ambient_dim(&self) -> usize {
        self.v.len()
    }

    /// Lattice dimension N - 1.
    pub fn dim(&self) -> usize {
        self.basis_exact.len()
    }

    pub fn v(&self) -> &[Integer] {
        &self.v
    }

    pub fn v_norm_sq(&self) -> &Integer {
        &self.v_norm_sq
    }

    /// Exact dual basis columns.
    pub fn basis_exact(&self) -> &[Vec<Rational>] {
        &self.basis_exact
    }

    /// Floating-point mirror of the dual basis.
    pub fn basis(&self) -> &[Vec<F>] {
        &self.basis_f
    }

    /// Applies the projection `Q = I - v v' / ||v||^2` in floating point.
    pub fn project(&self, x: &[F]) -> Vec<F> {
        assert_eq!(x.len(), self.v.len());
        let vx = dot(&self.v_f, x);
        let scale = vx / self.v_norm_sq_f;
        x.iter()
            .zip(self.v_f.iter())
            .map(|(&xi, &vi)| xi - scale * vi)
            .collect()
    }

    /// Squared distance `||Q(x - z)||^2` in floating point.
    pub fn projected_dist_sq(&self, x: &[F], z: &[Integer]) -> F {
        let diff: Vec<F> = x
            .iter()
            .zip(z.iter())
            .map(|(&xi, zi)| xi - cast::<F>(zi.to_f64().unwrap_or(f64::MAX)))
            .collect();
        let p = self.project(&diff);
        dot(&p, &p)
    }

    /// Returns an integer vector `z` minimizing `||Q target - Q z||^2`.
    ///
    /// Any member of the minimizing equivalence class `z + k v` may be
    /// returned; when the minimum is attained by several classes the first
    /// one found in enumeration order wins.
    pub fn closest_point(&self, target: &[F]) -> Vec<Integer> {
        assert_eq!(target.len(), self.v.len());
        let n = self.v.len();
        if n == 1 {
            return vec![Integer::zero()];
        }
        let t = self.project(target);
        let c: Vec<F> = self.wmat.iter().map(|w| dot(w, &t)).collect();
        let (u, _) = enumerate::closest_coeffs(&self.rmat, &c);
        self.coeffs_to_z(&u)
    }

    /// A lattice point of minimum nonzero Euclidean length and that length.
    pub fn shortest_vector(&self) -> Result<(Vec<F>, F), LatticeError> {
        if self.dim() == 0 {
            return Err(LatticeError::ZeroDimensional);
        }
        let (u, d_sq) = enumerate::shortest_coeffs(&self.rmat);
        let n = self.v.len();
        let mut vec_f = vec![F::zero(); n];
        for (j, col) in self.basis_f.iter().enumerate() {
            let uj = F::from_i64(u[j]).unwrap();
            for (acc, &bij) in vec_f.iter_mut().zip(col.iter()) {
                *acc = *acc + uj * bij;
            }
        }
        Ok((vec_f, d_sq.sqrt()))
    }

    /// Exact determinant of the Gram matrix `B' B` of the dual basis.
    /// Equals `1 / ||v||^2`; the empty (zero-dimensional) case returns 1.
    pub fn gram_det_exact(&self) -> Rational {
        let k = self.dim();
        let mut g: Vec<Vec<Rational>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| dot_exact(&self.basis_exact[i], &self.basis_exact[j]))
                    .collect()
            })
            .collect();
        det_rational(&mut g)
    }

    fn coeffs_to_z(&self, u: &[i64]) -> Vec<Integer> {
        let n = self.v.len();
        let mut z = vec![Integer::zero(); n];
        for (j, col) in self.zcols.iter().enumerate() {
            let uj = Integer::from(u[j]);
            for (zi, cij) in z.iter_mut().zip(col.iter()) {
                *zi += cij * &uj;
            }
        }
        z
    }
}

fn dot_exact(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn det_rational(m: &mut [Vec<Rational>]) -> Rational {
    let n = m.len();
    if n == 0 {
        return Rational::one();
    }
    let mut det = Rational::one();
    for k in 0..n {
        let pivot = (k..n).find(|&i| !m[i][k].is_zero());
        let Some(p) = pivot else {
            return Rational::zero();
        };
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k].clone();
        let inv = m[k][k].recip();
        for i in k + 1..n {
            let factor = &m[i][k] * &inv;
            for j in k..n {
                let sub = &factor * &m[k][j];
                m[i][j] -= sub;
            }
        }
    }
    det
}

/// A wavelength set together with its dual lattice: everything the range
/// estimator needs. Immutable; `closest_point` and `shortest_vector` are
/// pure and reentrant.
#[derive(Debug, Clone)]
pub struct LatticeContext<F: Real> {
    source: WavelengthSet,
    dual: DualLattice<F>,
}

impl<F: Real> LatticeContext<F> {
    pub fn new(ws: WavelengthSet) -> Self {
        let dual = DualLattice::new(ws.v().to_vec()).expect("wavelength v is primitive");
        Self { source: ws, dual }
    }

    pub fn without_reduction(ws: WavelengthSet) -> Self {
        let dual =
            DualLattice::without_reduction(ws.v().to_vec()).expect("wavelength v is primitive");
        Self { source: ws, dual }
    }

    pub fn source(&self) -> &WavelengthSet {
        &self.source
    }

    pub fn dual(&self) -> &DualLattice<F> {
        &self.dual
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    pub fn closest_point(&self, target: &[F]) -> Vec<Integer> {
        self.dual.closest_point(target)
    }

    pub fn shortest_vector(&self) -> Result<(Vec<F>, F), LatticeError> {
        self.dual.shortest_vector()
    }
}
