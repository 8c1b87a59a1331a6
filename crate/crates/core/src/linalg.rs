//! Rank-revealing dense linear algebra on small symmetric systems.

use nalgebra::{DMatrix, DVector};

/// SVD-based decomposition of a square matrix into range and kernel with a
/// Moore-Penrose pseudoinverse.
#[derive(Debug, Clone)]
pub struct RankRevealed {
    pub rank: usize,
    pub singular_values: DVector<f64>,
    pub threshold: f64,
    /// Orthonormal basis of the row space (the orthogonal complement of the kernel).
    pub range: Vec<DVector<f64>>,
    /// Orthonormal basis of the kernel.
    pub kernel: Vec<DVector<f64>>,
    pub pseudoinverse: DMatrix<f64>,
}

/// Singular values at or below `eps * sigma_max * n` count as zero.
pub fn rank_reveal(matrix: &DMatrix<f64>, eps: f64) -> RankRevealed {
    let n = matrix.ncols();
    if n == 0 {
        return RankRevealed {
            rank: 0,
            singular_values: DVector::zeros(0),
            threshold: 0.0,
            range: Vec::new(),
            kernel: Vec::new(),
            pseudoinverse: DMatrix::zeros(0, matrix.nrows()),
        };
    }
    let svd = matrix.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = svd.singular_values;
    let sigma_max = sigma.max();
    let threshold = eps * sigma_max * n as f64;

    let mut range = Vec::new();
    let mut kernel = Vec::new();
    let mut pinv = DMatrix::zeros(n, matrix.nrows());
    for k in 0..sigma.len() {
        let v = v_t.row(k).transpose();
        if sigma[k] > threshold && sigma_max > 0.0 {
            pinv += &v * u.column(k).transpose() / sigma[k];
            range.push(v);
        } else {
            kernel.push(v);
        }
    }
    RankRevealed {
        rank: range.len(),
        singular_values: sigma,
        threshold,
        range,
        kernel,
        pseudoinverse: pinv,
    }
}

/// Reproducible basis for the span of `vectors`: reduced row echelon form,
/// then each vector scaled so its largest entry has magnitude one and its first
/// nonzero entry is positive, with near-rational entries snapped.
pub fn canonical_basis(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let n = vectors[0].len();
    let mut m = DMatrix::from_fn(vectors.len(), n, |r, c| vectors[r][c]);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let tiny = 1e-12 * scale;

    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == m.nrows() {
            break;
        }
        let (best, best_val) = (pivot_row..m.nrows())
            .map(|r| (r, m[(r, col)].abs()))
            .fold((pivot_row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tiny {
            continue;
        }
        m.swap_rows(pivot_row, best);
        let p = m[(pivot_row, col)];
        for c in 0..n {
            m[(pivot_row, c)] /= p;
        }
        for r in 0..m.nrows() {
            if r != pivot_row {
                let factor = m[(r, col)];
                if factor != 0.0 {
                    for c in 0..n {
                        m[(r, c)] -= factor * m[(pivot_row, c)];
                    }
                }
            }
        }
        pivot_row += 1;
    }

    (0..pivot_row)
        .map(|r| {
            let mut v: DVector<f64> = m.row(r).transpose();
            for x in v.iter_mut() {
                if x.abs() <= 1e-13 {
                    *x = 0.0;
                }
            }
            let big = v.amax();
            v /= big;
            if let Some(first) = v.iter().find(|x| **x != 0.0) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
            v.apply(|x| *x = snap_rational(*x));
            v
        })
        .collect()
}

const MAX_DENOMINATOR: i64 = 24;
const SNAP_TOLERANCE: f64 = 1e-9;

/// Replaces `x` by `p/q` (q <= 24) when it is within 1e-9 of that ratio.
pub fn snap_rational(x: f64) -> f64 {
    match rational(x) {
        Some((p, q)) => p as f64 / q as f64,
        None => x,
    }
}

fn rational(x: f64) -> Option<(i64, i64)> {
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (x * q as f64).round();
        ((x - p / q as f64).abs() <= SNAP_TOLERANCE).then_some((p as i64, q))
    })
}

/// Smallest integer multiple of `v` when every entry is a small rational,
/// e.g. `(1, 1, 1, -1/3, -1/3, -1/3)` becomes `(3, 3, 3, -1, -1, -1)`.
pub fn integer_form(v: &DVector<f64>) -> Option<Vec<i64>> {
    let ratios: Vec<(i64, i64)> = v.iter().map(|x| rational(*x)).collect::<Option<_>>()?;
    let lcm = ratios.iter().fold(1i64, |acc, (_, q)| acc / gcd(acc, *q) * q);
    let ints: Vec<i64> = ratios.iter().map(|(p, q)| p * (lcm / q)).collect();
    let g = ints.iter().fold(0i64, |acc, x| gcd(acc, x.abs()));
    Some(if g > 1 { ints.iter().map(|x| x / g).collect() } else { ints })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_projector() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let r = rank_reveal(&a, 1e-10);
        assert_eq!(r.rank, 2);
        assert_eq!(r.kernel.len(), 1);
        let k = canonical_basis(&r.kernel);
        assert_eq!(k[0].as_slice(), &[1.0, -1.0, 0.0]);
        // A A+ A = A
        assert!((&a * &r.pseudoinverse * &a - &a).amax() < 1e-14);
    }

    #[test]
    fn zero_matrix_is_all_kernel() {
        let r = rank_reveal(&DMatrix::zeros(2, 2), 1e-10);
        assert_eq!(r.rank, 0);
        assert_eq!(r.kernel.len(), 2);
        assert_eq!(r.pseudoinverse, DMatrix::zeros(2, 2));
    }

    #[test]
    fn canonical_basis_is_reproducible() {
        let a = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        let b = DVector::from_vec(vec![0.0, 1.0, -1.0]);
        let mixed = [&a * 0.6 + &b * 0.8, &a * -0.8 + &b * 0.6];
        let basis = canonical_basis(&mixed);
        assert_eq!(basis.len(), 2);
        assert_eq!(basis[0].as_slice(), &[0.5, 0.0, 1.0]);
        assert_eq!(basis[1].as_slice(), &[0.0, 1.0, -1.0]);
    }

    #[test]
    fn integer_forms() {
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]);
        assert_eq!(integer_form(&v).unwrap(), vec![3, 3, 3, -1, -1, -1]);
        let w = DVector::from_vec(vec![0.5, 0.25]);
        assert_eq!(integer_form(&w).unwrap(), vec![2, 1]);
        assert!(integer_form(&DVector::from_vec(vec![std::f64::consts::PI])).is_none());
    }
}
