//! LLL basis reduction, used as preprocessing before enumeration.

use crate::real::{cast, Real};

/// Iteration cap; reduction is a performance aid, so bailing out early is
/// harmless for correctness.
const MAX_SWEEPS: usize = 10_000;

/// Gram-Schmidt orthogonalization of `cols[..=upto]` (columns in R^m).
/// Returns the orthogonal vectors; coefficients are recomputed on demand.
fn gram_schmidt<F: Real>(cols: &[Vec<F>], upto: usize) -> Vec<Vec<F>> {
    let mut star: Vec<Vec<F>> = Vec::with_capacity(upto + 1);
    for i in 0..=upto {
        let mut b = cols[i].clone();
        for s in star.iter() {
            let mu = dot(&cols[i], s) / dot(s, s);
            for (bi, si) in b.iter_mut().zip(s.iter()) {
                *bi = *bi - mu * *si;
            }
        }
        star.push(b);
    }
    star
}

pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b.iter())
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// LLL reduction with parameter `delta` of the lattice spanned by the
/// columns of `basis` (each column a vector in R^m, m >= k). The basis is
/// reduced in place; the returned k x k integer matrix `t` (column-major)
/// satisfies `reduced = original * t` and is unimodular.
pub(crate) fn lll<F: Real>(basis: &mut [Vec<F>], delta: f64) -> Vec<Vec<i64>> {
    let k = basis.len();
    let mut t: Vec<Vec<i64>> = (0..k)
        .map(|j| (0..k).map(|i| i64::from(i == j)).collect())
        .collect();
    if k < 2 {
        return t;
    }
    let delta: F = cast(delta);
    let half: F = cast(0.5);

    let mut col = 1;
    let mut sweeps = 0;
    while col < k {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            break;
        }
        let star = gram_schmidt(basis, col);
        // Size-reduce column `col` against earlier columns.
        for j in (0..col).rev() {
            let mu = dot(&basis[col], &star[j]) / dot(&star[j], &star[j]);
            if mu.abs() > half {
                let q = mu.round();
                let qi = q.to_i64().expect("reduction coefficient fits i64");
                for i in 0..basis[col].len() {
                    let bji = basis[j][i];
                    basis[col][i] = basis[col][i] - q * bji;
                }
                for i in 0..k {
                    let tji = t[j][i];
                    t[col][i] -= qi * tji;
                }
            }
        }
        // Lovasz condition between col and col-1.
        let star = gram_schmidt(basis, col);
        let mu = dot(&basis[col], &star[col - 1]) / dot(&star[col - 1], &star[col - 1]);
        let lhs = dot(&star[col], &star[col]);
        let rhs = (delta - mu * mu) * dot(&star[col - 1], &star[col - 1]);
        if lhs >= rhs {
            col += 1;
        } else {
            basis.swap(col, col - 1);
            t.swap(col, col - 1);
            col = col.max(2) - 1;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_classic_2d_basis() {
        let mut basis = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let t = lll(&mut basis, 0.75);
        // Shortest vector of Z^2 has norm 1; a reduced basis starts with it.
        let n0 = dot(&basis[0], &basis[0]);
        assert!(n0 <= 1.0 + 1e-12);
        // Transform is unimodular for 2x2: |det| = 1.
        let det = t[0][0] * t[1][1] - t[1][0] * t[0][1];
        assert_eq!(det.abs(), 1);
    }

    #[test]
    fn single_column_is_noop() {
        let mut basis = vec![vec![3.0, 4.0]];
        let t = lll(&mut basis, 0.75);
        assert_eq!(t, vec![vec![1]]);
        assert_eq!(basis[0], vec![3.0, 4.0]);
    }
}
