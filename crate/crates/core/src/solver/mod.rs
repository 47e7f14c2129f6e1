//! Coefficients of a plane `c + α·x = 0` through a set of points.
//!
//! Each point `m_j` contributes the row `α·m_j = -c`. Rows are reduced by
//! Gaussian elimination with partial pivoting (largest magnitude in the
//! column, lowest row index on ties). Columns without a usable pivot are free;
//! their coefficients are drawn at random from `±[0.1, 1.0]` and the pivot
//! coefficients are back-substituted.

#[cfg(feature = "exact")]
pub mod exact;

use rand::Rng;
use thiserror::Error;

/// Magnitude range of randomly drawn free coefficients.
pub const FREE_COEFF_RANGE: (f64, f64) = (0.1, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("row {row} has {found} entries, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row} contains a non-finite entry")]
    NonFinite { row: usize },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("system is rank deficient (rank {rank}, consistent: {consistent})")]
    RankDeficient { rank: usize, consistent: bool },
    #[error("no plane with this constant passes through all rows (rank {rank})")]
    Inconsistent { rank: usize },
    #[error("all {rows} rows are identical")]
    IdenticalRows { rows: usize },
    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Pivots at or below `rank_rel × max|entry|` count as zero.
    pub rank_rel: f64,
    /// Accepted residual relative to `|c| + Σ|α_i m_i|` of each row.
    pub residual_rel: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self { rank_rel: 1e-10, residual_rel: 1e-8 }
    }
}

/// The points a new plane must pass through, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct MidpointMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl MidpointMatrix {
    pub fn new(n: usize, rows: Vec<Vec<f64>>) -> Result<Self, SolveError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(SolveError::DimensionMismatch { row: i, expected: n, found: r.len() });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(SolveError::NonFinite { row: i });
            }
        }
        Ok(Self { n, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coeffs: Vec<f64>,
    pub rank: usize,
    /// `max_j |c + α·m_j|`.
    pub residual: f64,
    /// `max_j (|c| + Σ|α_i m_ij|)`, the scale `residual` is judged against.
    pub residual_scale: f64,
    pub randomized_free_count: usize,
}

/// Row-echelon form of `[rows | rhs]`.
struct Echelon {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    pivot_cols: Vec<usize>,
    consistent: bool,
}

fn eliminate(m: &MidpointMatrix, rhs: &[f64], tol: SolverTolerances) -> Echelon {
    let n = m.n;
    let k = m.rows.len();
    let mut a = m.rows.clone();
    let mut b = rhs.to_vec();
    let pivot_tol = tol.rank_rel * m.max_abs();
    let mut pivot_cols = Vec::with_capacity(n.min(k));
    let mut r = 0;
    for col in 0..n {
        if r == k {
            break;
        }
        let mut p = r;
        for i in r + 1..k {
            if a[i][col].abs() > a[p][col].abs() {
                p = i;
            }
        }
        if a[p][col].abs() <= pivot_tol || a[p][col] == 0.0 {
            continue;
        }
        a.swap(r, p);
        b.swap(r, p);
        let (head, tail) = a.split_at_mut(r + 1);
        let pivot_row = &head[r];
        for (off, row) in tail.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for j in col..n {
                    row[j] -= f * pivot_row[j];
                }
                b[r + 1 + off] -= f * b[r];
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    // Leftover rows read 0 = b[i]; anything well above rounding is a contradiction.
    let growth = b.iter().chain(rhs).fold(0.0f64, |m, x| m.max(x.abs()));
    let consistent = b[r..].iter().all(|x| x.abs() <= 1e-9 * growth.max(f64::MIN_POSITIVE));
    Echelon { a, b, pivot_cols, consistent }
}

fn back_substitute(e: &Echelon, n: usize, mut free: impl FnMut() -> f64) -> (Vec<f64>, usize) {
    let mut x = vec![0.0; n];
    let mut is_pivot = vec![false; n];
    for &c in &e.pivot_cols {
        is_pivot[c] = true;
    }
    let mut randomized = 0;
    for (c, xc) in x.iter_mut().enumerate() {
        if !is_pivot[c] {
            *xc = free();
            randomized += 1;
        }
    }
    for (i, &pc) in e.pivot_cols.iter().enumerate().rev() {
        let row = &e.a[i];
        let s = (pc + 1..n).fold(e.b[i], |acc, j| acc - row[j] * x[j]);
        x[pc] = s / row[pc];
    }
    (x, randomized)
}

fn finish(m: &MidpointMatrix, rhs: &[f64], coeffs: Vec<f64>, rank: usize, randomized: usize, tol: SolverTolerances) -> Result<SolveReport, SolveError> {
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for (row, &r) in m.rows.iter().zip(rhs) {
        let (v, mag) = row.iter().zip(&coeffs).fold((-r, r.abs()), |(v, mag), (x, a)| (v + a * x, mag + (a * x).abs()));
        residual = residual.max(v.abs());
        scale = scale.max(mag);
        worst = worst.max(v.abs() / mag.max(f64::MIN_POSITIVE));
    }
    if worst > tol.residual_rel || !coeffs.iter().all(|c| c.is_finite()) {
        return Err(SolveError::Residual { residual, tolerance: tol.residual_rel * scale });
    }
    Ok(SolveReport { coeffs, rank, residual, residual_scale: scale, randomized_free_count: randomized })
}

/// Draws one free coefficient uniformly from `±[0.1, 1.0]`.
pub fn random_free_coeff<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let mag = rng.random_range(FREE_COEFF_RANGE.0..=FREE_COEFF_RANGE.1);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// The unique plane through exactly `n` points in `n` dimensions.
pub fn solve_plane_through(m: &MidpointMatrix, constant: f64, tol: SolverTolerances) -> Result<SolveReport, SolveError> {
    if m.len() != m.n {
        return Err(SolveError::RowCount { expected: m.n, found: m.len() });
    }
    let rhs = vec![-constant; m.len()];
    let e = eliminate(m, &rhs, tol);
    let rank = e.pivot_cols.len();
    if rank < m.n {
        return Err(SolveError::RankDeficient { rank, consistent: e.consistent });
    }
    let (coeffs, _) = back_substitute(&e, m.n, || unreachable!("full rank has no free columns"));
    finish(m, &rhs, coeffs, rank, 0, tol)
}

/// A plane through fewer than `n` points; the `n - rank` free coefficients
/// are random.
pub fn solve_underdetermined<R: Rng + ?Sized>(m: &MidpointMatrix, constant: f64, rng: &mut R, tol: SolverTolerances) -> Result<SolveReport, SolveError> {
    if m.len() >= m.n {
        return Err(SolveError::RowCount { expected: m.n.saturating_sub(1), found: m.len() });
    }
    if m.len() > 1 && m.rows.windows(2).all(|w| w[0] == w[1]) {
        return Err(SolveError::IdenticalRows { rows: m.len() });
    }
    solve_through(m, constant, rng, tol)
}

/// A plane through any number of points. Rank-deficient but consistent
/// systems are completed with random free coefficients.
pub fn solve_through<R: Rng + ?Sized>(m: &MidpointMatrix, constant: f64, rng: &mut R, tol: SolverTolerances) -> Result<SolveReport, SolveError> {
    solve_linear(m, &vec![-constant; m.len()], rng, tol)
}

/// Solves `x·row_j = rhs_j` for every row, randomizing free coordinates.
/// The residual of row `j` is `|x·row_j - rhs_j|`, judged against
/// `|rhs_j| + Σ|x_i row_ji|`.
pub fn solve_linear<R: Rng + ?Sized>(m: &MidpointMatrix, rhs: &[f64], rng: &mut R, tol: SolverTolerances) -> Result<SolveReport, SolveError> {
    if rhs.len() != m.len() {
        return Err(SolveError::RowCount { expected: m.len(), found: rhs.len() });
    }
    let e = eliminate(m, rhs, tol);
    let rank = e.pivot_cols.len();
    if !e.consistent {
        return Err(SolveError::Inconsistent { rank });
    }
    let (coeffs, randomized) = back_substitute(&e, m.n, || random_free_coeff(rng));
    finish(m, rhs, coeffs, rank, randomized, tol)
}

/// Numerical rank with pivots at or below `rank_rel × max|entry|` treated as zero.
pub fn numeric_rank(m: &MidpointMatrix, rank_rel: f64) -> usize {
    eliminate(m, &vec![-1.0; m.len()], SolverTolerances { rank_rel, ..SolverTolerances::default() }).pivot_cols.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mm(n: usize, rows: &[&[f64]]) -> MidpointMatrix {
        MidpointMatrix::new(n, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// Cramer's rule for `α·m_j = -c`, independent of the elimination path.
    fn cramer2(m1: [f64; 2], m2: [f64; 2], c: f64) -> [f64; 2] {
        let det = m1[0] * m2[1] - m1[1] * m2[0];
        [(-c * m2[1] + c * m1[1]) / det, (-c * m1[0] + c * m2[0]) / det]
    }

    #[test]
    fn two_by_two_matches_cramer() {
        let oracle = cramer2([1.0, 0.0], [0.0, 3.0], 1.0);
        assert_eq!(oracle, [-1.0, -1.0 / 3.0]);
        let r = solve_plane_through(&mm(2, &[&[1.0, 0.0], &[0.0, 3.0]]), 1.0, SolverTolerances::default()).unwrap();
        assert!((r.coeffs[0] - oracle[0]).abs() < 1e-15);
        assert!((r.coeffs[1] - oracle[1]).abs() < 1e-15);
        assert_eq!(r.rank, 2);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.randomized_free_count, 0);
    }

    #[test]
    fn collinear_with_origin_is_rank_deficient() {
        let err = solve_plane_through(&mm(2, &[&[1.0, 1.0], &[2.0, 2.0]]), 1.0, SolverTolerances::default()).unwrap_err();
        assert_eq!(err, SolveError::RankDeficient { rank: 1, consistent: false });
    }

    #[test]
    fn identity_rows() {
        let r = solve_plane_through(&mm(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]), 1.0, SolverTolerances::default()).unwrap();
        assert_eq!(r.coeffs, vec![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn wrong_row_count() {
        let err = solve_plane_through(&mm(3, &[&[1.0, 0.0, 0.0]]), 1.0, SolverTolerances::default()).unwrap_err();
        assert_eq!(err, SolveError::RowCount { expected: 3, found: 1 });
    }

    #[test]
    fn underdetermined_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tol = SolverTolerances::default();

        let r = solve_underdetermined(&mm(2, &[&[2.0, 0.0]]), 1.0, &mut rng, tol).unwrap();
        assert_eq!(r.coeffs[0], -0.5);
        let a2 = r.coeffs[1].abs();
        assert!((0.1..=1.0).contains(&a2));
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.randomized_free_count, 1);

        let r = solve_underdetermined(&mm(2, &[]), 1.0, &mut rng, tol).unwrap();
        assert_eq!(r.randomized_free_count, 2);
        assert_eq!(r.residual, 0.0);
        assert!(r.coeffs.iter().all(|c| (0.1..=1.0).contains(&c.abs())));

        let r = solve_underdetermined(&mm(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]), 1.0, &mut rng, tol).unwrap();
        assert_eq!(&r.coeffs[..2], &[-1.0, -1.0]);
        assert_eq!(r.randomized_free_count, 1);
        // back-substitution oracle
        for row in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
            let v: f64 = 1.0 + row.iter().zip(&r.coeffs).map(|(m, a)| m * a).sum::<f64>();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn underdetermined_rejects_identical_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = solve_underdetermined(&mm(3, &[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]), 1.0, &mut rng, SolverTolerances::default()).unwrap_err();
        assert_eq!(err, SolveError::IdenticalRows { rows: 2 });
    }

    #[test]
    fn inconsistent_system_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = solve_through(&mm(2, &[&[1.0, 1.0], &[2.0, 2.0]]), 1.0, &mut rng, SolverTolerances::default()).unwrap_err();
        assert_eq!(err, SolveError::Inconsistent { rank: 1 });
        // a midpoint at the origin can never satisfy 1 + α·0 = 0
        let err = solve_through(&mm(2, &[&[0.0, 0.0]]), 1.0, &mut rng, SolverTolerances::default()).unwrap_err();
        assert_eq!(err, SolveError::Inconsistent { rank: 0 });
    }

    #[test]
    fn more_rows_than_columns_when_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // three points on the line x + y = 2
        let m = mm(2, &[&[2.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]);
        let r = solve_through(&m, 1.0, &mut rng, SolverTolerances::default()).unwrap();
        assert_eq!(r.rank, 2);
        assert!((r.coeffs[0] + 0.5).abs() < 1e-15 && (r.coeffs[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn general_right_hand_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // x + y = 3, x - y = -1
        let m = mm(2, &[&[1.0, 1.0], &[1.0, -1.0]]);
        let r = solve_linear(&m, &[3.0, -1.0], &mut rng, SolverTolerances::default()).unwrap();
        assert_eq!(r.coeffs, vec![1.0, 2.0]);
        assert!(solve_linear(&m, &[3.0], &mut rng, SolverTolerances::default()).is_err());
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&mm(2, &[&[1.0, 0.0], &[0.0, 1.0]]), 1e-10), 2);
        assert_eq!(numeric_rank(&mm(2, &[&[3.0, 4.0], &[3.0, 4.0]]), 1e-10), 1);

        // Oracle: the second pivot equals det / first pivot, with the larger
        // entry 2 chosen as first pivot.
        let det = 1.0 * 4.000_000_000_1 - 2.0 * 2.0;
        let second_pivot = (det / 2.0f64).abs();
        assert!((second_pivot - 5e-11).abs() < 1e-15);
        let max_entry = 4.000_000_000_1;
        assert!(second_pivot > 1e-12 * max_entry && second_pivot < 1e-8 * max_entry);

        let m = mm(2, &[&[1.0, 2.0], &[2.0, 4.000_000_000_1]]);
        assert_eq!(numeric_rank(&m, 1e-12), 2);
        assert_eq!(numeric_rank(&m, 1e-8), 1);
    }

    #[test]
    fn pivot_ties_take_lowest_row() {
        // equal magnitudes in column 0: row 0 must stay the first pivot
        let m = mm(2, &[&[2.0, 1.0], &[-2.0, 3.0]]);
        let e = eliminate(&m, &[-1.0, -1.0], SolverTolerances::default());
        assert_eq!(e.a[0], vec![2.0, 1.0]);
    }

    #[test]
    fn general_path_agrees_bitwise_when_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = mm(3, &[&[0.5, 2.0, -1.0], &[3.0, 0.25, 1.5], &[-2.0, 1.0, 4.0]]);
        let a = solve_plane_through(&m, 1.0, SolverTolerances::default()).unwrap();
        let b = solve_through(&m, 1.0, &mut rng, SolverTolerances::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_free_coefficients() {
        let m = mm(4, &[&[1.0, 2.0, 3.0, 4.0]]);
        let run = |seed| solve_underdetermined(&m, 1.0, &mut ChaCha8Rng::seed_from_u64(seed), SolverTolerances::default()).unwrap().coeffs;
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(MidpointMatrix::new(2, vec![vec![1.0]]), Err(SolveError::DimensionMismatch { row: 0, .. })));
        assert!(matches!(MidpointMatrix::new(1, vec![vec![f64::NAN]]), Err(SolveError::NonFinite { row: 0 })));
    }

    proptest! {
        #[test]
        fn residual_within_tolerance_on_success(
            (n, rows) in (1usize..8).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(-100i32..100, n), 0..=n))),
            seed in 0u64..1000,
        ) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(|x| x as f64 / 2.0).collect()).collect();
            let m = MidpointMatrix::new(n, rows).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Ok(r) = solve_through(&m, 1.0, &mut rng, SolverTolerances::default()) {
                prop_assert!(r.residual <= 1e-8 * r.residual_scale);
                prop_assert_eq!(r.randomized_free_count, n - r.rank);
                for row in m.rows() {
                    let v = 1.0 + row.iter().zip(&r.coeffs).map(|(x, a)| x * a).sum::<f64>();
                    let s = 1.0 + row.iter().zip(&r.coeffs).map(|(x, a)| (x * a).abs()).sum::<f64>();
                    prop_assert!(v.abs() <= 1e-8 * s);
                }
            }
        }
    }
}
