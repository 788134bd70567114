//! Schnorr-Euchner depth-first enumeration over an upper-triangular system.
//!
//! Both the closest-point and the shortest-vector searches reduce to
//! minimizing `||c - R u||^2` over integer coefficient vectors `u`, where
//! `R` is the square upper-triangular factor of the lattice basis. The
//! zig-zag visit order at each level makes the per-level distance terms
//! nondecreasing, so a level can be abandoned as soon as its partial
//! distance reaches the incumbent.

use crate::real::Real;

/// Minimizes `||c - R u||^2` over `u` in Z^k. `r` is row-major upper
/// triangular with positive diagonal. Returns the first minimizer found in
/// enumeration order and its squared distance.
pub(crate) fn closest_coeffs<F: Real>(r: &[Vec<F>], c: &[F]) -> (Vec<i64>, F) {
    enumerate(r, c, false, F::infinity(), vec![0; r.len()])
}

/// Finds a shortest nonzero vector: minimizes `||R u||^2` over `u != 0`.
/// Seeded with the shortest basis column so the zero leaf can be skipped
/// without leaving the search unbounded.
pub(crate) fn shortest_coeffs<F: Real>(r: &[Vec<F>]) -> (Vec<i64>, F) {
    let k = r.len();
    assert!(k >= 1, "zero-dimensional lattice has no shortest vector");
    let mut best = F::infinity();
    let mut seed = vec![0i64; k];
    for j in 0..k {
        let norm_sq = (0..=j).fold(F::zero(), |acc, i| acc + r[i][j] * r[i][j]);
        if norm_sq < best {
            best = norm_sq;
            seed.iter_mut().for_each(|x| *x = 0);
            seed[j] = 1;
        }
    }
    let zero = vec![F::zero(); k];
    enumerate(r, &zero, true, best, seed)
}

fn enumerate<F: Real>(
    r: &[Vec<F>],
    c: &[F],
    exclude_zero: bool,
    mut best_d: F,
    mut best_u: Vec<i64>,
) -> (Vec<i64>, F) {
    let k = r.len();
    if k == 0 {
        return (Vec::new(), F::zero());
    }
    debug_assert_eq!(c.len(), k);

    let mut u = vec![0i64; k];
    let mut step = vec![0i64; k];
    let mut center = vec![F::zero(); k];
    // part[i] holds the squared distance contributed by levels above i.
    let mut part = vec![F::zero(); k];

    let enter = |i: usize, u: &[i64], center: &mut [F]| {
        let mut s = c[i];
        for j in i + 1..k {
            s = s - r[i][j] * F::from_i64(u[j]).expect("coefficient in float range");
        }
        center[i] = s / r[i][i];
    };

    let mut i = k - 1;
    enter(i, &u, &mut center);
    u[i] = center[i]
        .round()
        .to_i64()
        .expect("rounded center fits i64");
    step[i] = if center[i] >= F::from_i64(u[i]).unwrap() {
        1
    } else {
        -1
    };

    loop {
        let e = (center[i] - F::from_i64(u[i]).unwrap()) * r[i][i];
        let d = part[i] + e * e;
        if d < best_d {
            if i == 0 {
                if !(exclude_zero && u.iter().all(|&x| x == 0)) {
                    best_d = d;
                    best_u.copy_from_slice(&u);
                }
                u[0] += step[0];
                step[0] = -step[0] - step[0].signum();
            } else {
                part[i - 1] = d;
                i -= 1;
                enter(i, &u, &mut center);
                u[i] = center[i]
                    .round()
                    .to_i64()
                    .expect("rounded center fits i64");
                step[i] = if center[i] >= F::from_i64(u[i]).unwrap() {
                    1
                } else {
                    -1
                };
            }
        } else {
            if i == k - 1 {
                break;
            }
            i += 1;
            u[i] += step[i];
            step[i] = -step[i] - step[i].signum();
        }
    }
    (best_u, best_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_identity_lattice() {
        let r = vec![vec![1.0f64, 0.0], vec![0.0, 1.0]];
        let (u, d) = closest_coeffs(&r, &[0.4, -1.3]);
        assert_eq!(u, vec![0, -1]);
        assert!((d - (0.16 + 0.09)).abs() < 1e-12);
    }

    #[test]
    fn shortest_of_scaled_identity() {
        let r = vec![vec![3.0f64, 0.0], vec![0.0, 2.0]];
        let (u, d) = shortest_coeffs(&r);
        assert_eq!(u, vec![0, 1]);
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_beats_basis_columns_when_reduction_missed() {
        // Basis (1, 0), (0.9, 0.1): shortest vector is their difference.
        let r = vec![vec![1.0f64, 0.9], vec![0.0, 0.1]];
        let (u, d) = shortest_coeffs(&r);
        assert_eq!(u[1].abs(), 1);
        assert!((d - 0.02).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_search() {
        let r = vec![vec![2.0]];
        let (u, d) = closest_coeffs(&r, &[3.1]);
        assert_eq!(u, vec![2]);
        assert!((d - (3.1f64 - 4.0).powi(2)).abs() < 1e-12);
    }
}
