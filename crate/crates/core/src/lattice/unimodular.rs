//! Unimodular completion of a primitive integer vector.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Extended Euclid: returns `(g, s, t)` with `s*a + t*b = g = gcd(a, b) >= 0`.
pub(crate) fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r);
        let s = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if r0.is_negative() {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Completes a vector `v` of jointly relatively prime integers to a
/// unimodular matrix whose first column is `v`, by stacking the inverses of
/// the 2x2 Bezout blocks that reduce `v` to the first unit vector.
///
/// Returns the matrix column-major; `cols[0] == v` and `det = +-1`.
pub(crate) fn complete_primitive(v: &[BigInt]) -> Vec<Vec<BigInt>> {
    let n = v.len();
    assert!(n >= 1);
    if n == 1 {
        return vec![vec![v[0].clone()]];
    }

    // Running gcds h[k] = gcd(v[0..=k]) with Bezout pairs s*h[k-1] + t*v[k] = h[k].
    let mut h = Vec::with_capacity(n);
    h.push(v[0].abs());
    let mut bezout = Vec::with_capacity(n);
    bezout.push((BigInt::zero(), BigInt::zero())); // unused slot for k = 0
    for k in 1..n {
        let (g, s, t) = ext_gcd(&h[k - 1], &v[k]);
        h.push(g);
        bezout.push((s, t));
    }
    debug_assert!(h[n - 1].is_one(), "input vector must be primitive");

    // Column-major identity.
    let mut cols: Vec<Vec<BigInt>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect();

    // Left-multiply by the inverse blocks, innermost first. The block for
    // level k mixes rows 0 and k:
    //   [ h[k-1]/h[k]  -t ]
    //   [ v[k]/h[k]     s ]
    for k in (1..n).rev() {
        let (s, t) = bezout[k].clone();
        let m00 = &h[k - 1] / &h[k];
        let mk0 = &v[k] / &h[k];
        for col in cols.iter_mut() {
            let c0 = col[0].clone();
            let ck = col[k].clone();
            col[0] = &m00 * &c0 - &t * &ck;
            col[k] = &mk0 * &c0 + &s * &ck;
        }
    }

    // The gcd chain used |v[0]|, so the construction yields first column
    // (|v0|, v1, ..., v_{n-1}). Negating row 0 restores a negative v[0] and
    // keeps |det| = 1.
    if v[0].is_negative() {
        for col in cols.iter_mut() {
            col[0] = -col[0].clone();
        }
    }

    debug_assert_eq!(cols[0], v, "first column must equal the input vector");
    cols
}

/// Exact integer determinant via fraction-free (Bareiss) elimination.
/// Used to verify unimodularity in tests.
#[cfg(test)]
pub(crate) fn det_exact(cols: &[Vec<BigInt>]) -> BigInt {
    let n = cols.len();
    if n == 0 {
        return BigInt::one();
    }
    // Row-major working copy.
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
        .collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}
