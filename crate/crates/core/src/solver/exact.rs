//! Exact rational solve of `α·m_j = -c` for `n` rows in `n` unknowns.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::SolveError;

/// The exact rational value of a finite `f64`.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

pub fn rational_rows(rows: &[Vec<f64>]) -> Vec<Vec<BigRational>> {
    rows.iter().map(|r| r.iter().map(|&x| rational(x)).collect()).collect()
}

/// Fraction-exact Gaussian elimination. Singular systems report their rank.
pub fn solve_plane_through_exact(rows: &[Vec<BigRational>], constant: &BigRational) -> Result<Vec<BigRational>, SolveError> {
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(SolveError::DimensionMismatch { row: i, expected: n, found: r.len() });
        }
    }
    let mut a: Vec<Vec<BigRational>> = rows.to_vec();
    let mut b = vec![-constant.clone(); n];
    let mut pivot_cols = Vec::with_capacity(n);
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..n).find(|&i| !a[i][col].is_zero()) else { continue };
        a.swap(r, p);
        b.swap(r, p);
        for i in r + 1..n {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] / &a[r][col];
            for j in col..n {
                let t = &f * &a[r][j];
                a[i][j] -= t;
            }
            let t = &f * &b[r];
            b[i] -= t;
        }
        pivot_cols.push(col);
        r += 1;
    }
    if r < n {
        let consistent = b[r..].iter().all(Zero::is_zero);
        return Err(SolveError::RankDeficient { rank: r, consistent });
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i].clone();
        for j in i + 1..n {
            s -= &a[i][j] * &x[j];
        }
        x[i] = s / &a[i][i];
    }
    Ok(x)
}

/// `max_j |c + α·m_j|`, computed exactly.
pub fn exact_residual(rows: &[Vec<BigRational>], constant: &BigRational, coeffs: &[BigRational]) -> BigRational {
    rows.iter()
        .map(|r| r.iter().zip(coeffs).fold(constant.clone(), |acc, (m, a)| acc + m * a).abs())
        .max()
        .unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}
