//! Points, hyperplanes, side tests and orientation vectors.
//!
//! A hyperplane is stored as the affine functional `c + a_1 x_1 + ... + a_n x_n`
//! with `c = 1` for every plane the engine solves. A point is on the positive
//! side when the functional is positive at its coordinates.
//!
//! Orientation vectors pack one bit per plane, plane 0 in the least
//! significant bit of the first word. A set bit means the positive side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PointId = u64;

/// Relative width of the on-plane band used by [`evaluate_side`].
pub const DEFAULT_ON_PLANE_REL: f64 = 1e-9;

/// `π / π₂₀`, where `π₂₀` is π truncated to 20 decimals.
///
/// The true ratio exceeds one by about `8.4e-22`, which is below f64
/// resolution, so this constant is exactly `1.0`. [`TauMode::PiRatio`]
/// carries the excess symbolically instead: a value inside the on-plane band
/// resolves to the positive side.
pub const TAU_PI_RATIO: f64 = std::f64::consts::PI / 3.141_592_653_589_793_238_46;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point {point} lies on plane {plane}")]
    Incident { point: PointId, plane: usize },
    #[error("orientation vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: PointId,
    pub coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Point {
    pub fn new(id: PointId, coords: Vec<f64>) -> Self {
        Self { id, coords, label: None }
    }

    pub fn labeled(id: PointId, coords: Vec<f64>, label: impl Into<String>) -> Self {
        Self { id, coords, label: Some(label.into()) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// How the constant term of every plane is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// The constant is exactly one; a point inside the band is incident.
    #[default]
    Off,
    /// The constant is `π/π₂₀`, infinitesimally above one. No point is ever
    /// incident: band values resolve to the positive side.
    PiRatio,
}

/// Parameters of the side test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideRule {
    pub on_plane_rel: f64,
    pub tau: TauMode,
}

impl Default for SideRule {
    fn default() -> Self {
        Self { on_plane_rel: DEFAULT_ON_PLANE_REL, tau: TauMode::Off }
    }
}

impl SideRule {
    pub fn with_tau(tau: TauMode) -> Self {
        Self { tau, ..Self::default() }
    }
}

/// Counts the arithmetic in an instrumented evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub constant: f64,
    pub coeffs: Vec<f64>,
    /// Ordinal of the plane in its arrangement.
    pub index: usize,
    /// Constrained through `n` points; never refit.
    pub saturated: bool,
}

impl Hyperplane {
    /// A plane `1 + coeffs · x = 0`.
    pub fn new(index: usize, coeffs: Vec<f64>, saturated: bool) -> Self {
        debug_assert!(coeffs.iter().any(|&c| c != 0.0), "plane normal must be nonzero");
        Self { constant: 1.0, coeffs, index, saturated }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `constant + Σ coeffs[i]·x[i]`, accumulated left to right. Callers check
    /// dimensions.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).fold(self.constant, |acc, (a, xi)| acc + a * xi)
    }

    /// Same as [`Hyperplane::value`], recording `n` multiplications and `n`
    /// additions.
    pub fn value_counted(&self, x: &[f64], ops: &mut OpCount) -> f64 {
        let mut acc = self.constant;
        for (a, xi) in self.coeffs.iter().zip(x) {
            let prod = a * xi;
            ops.multiplications += 1;
            acc += prod;
            ops.additions += 1;
        }
        acc
    }

    /// The value at `x` together with `1 + |constant| + Σ|coeffs[i]·x[i]|`,
    /// the magnitude the on-plane band is relative to.
    #[inline]
    pub fn value_and_magnitude(&self, x: &[f64]) -> (f64, f64) {
        let mut value = self.constant;
        let mut mag = 1.0 + self.constant.abs();
        for (a, xi) in self.coeffs.iter().zip(x) {
            let t = a * xi;
            value += t;
            mag += t.abs();
        }
        (value, mag)
    }

    /// Half-width of the on-plane band at `x`.
    pub fn band(&self, x: &[f64], rel: f64) -> f64 {
        rel * self.value_and_magnitude(x).1
    }

    pub fn normal_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Appends `r` zero coefficients.
    pub fn lift(&mut self, r: usize) {
        self.coeffs.extend(std::iter::repeat(0.0).take(r));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Positive,
    Negative,
    OnPlane,
}

impl Side {
    pub fn signum(self) -> i8 {
        match self {
            Side::Positive => 1,
            Side::Negative => -1,
            Side::OnPlane => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideEvaluation {
    pub value: f64,
    pub side: Side,
}

/// Classifies `x` against `plane`.
pub fn evaluate_side(x: &[f64], plane: &Hyperplane, rule: SideRule) -> Result<SideEvaluation, GeometryError> {
    if x.len() != plane.dim() {
        return Err(GeometryError::DimensionMismatch { expected: plane.dim(), found: x.len() });
    }
    let (value, mag) = plane.value_and_magnitude(x);
    Ok(SideEvaluation { value, side: classify(value, rule.on_plane_rel * mag, rule.tau) })
}

#[inline]
pub(crate) fn classify(value: f64, band: f64, tau: TauMode) -> Side {
    if value > band {
        Side::Positive
    } else if value < -band {
        Side::Negative
    } else {
        match tau {
            TauMode::Off => Side::OnPlane,
            TauMode::PiRatio => Side::Positive,
        }
    }
}

/// Packed sequence of ±1 signs, one per plane.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct OrientationVector {
    words: Vec<u64>,
    len: usize,
}

impl OrientationVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// From signs, plane 0 first. Any positive entry is `+1`, anything else `-1`.
    pub fn from_signs(signs: &[i8]) -> Self {
        let mut ov = Self::new();
        for &s in signs {
            ov.push(s > 0);
        }
        ov
    }

    /// From packed words; bits beyond `len` must be zero.
    pub fn from_words(words: Vec<u64>, len: usize) -> Option<Self> {
        if words.len() != len.div_ceil(64) {
            return None;
        }
        if len % 64 != 0 {
            if let Some(&last) = words.last() {
                if last >> (len % 64) != 0 {
                    return None;
                }
            }
        }
        Some(Self { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Whether bit `j` is the positive side.
    pub fn is_positive(&self, j: usize) -> bool {
        assert!(j < self.len, "bit {j} out of range for length {}", self.len);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn get(&self, j: usize) -> i8 {
        if self.is_positive(j) {
            1
        } else {
            -1
        }
    }

    pub fn push(&mut self, positive: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if positive {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Overwrites bit `j`.
    pub fn set(&mut self, j: usize, positive: bool) {
        assert!(j < self.len, "bit {j} out of range for length {}", self.len);
        let mask = 1u64 << (j % 64);
        if positive {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    /// Extends by one bit. Panics on [`Side::OnPlane`], which has no bit.
    pub fn append_bit(mut self, side: Side) -> Self {
        match side {
            Side::Positive => self.push(true),
            Side::Negative => self.push(false),
            Side::OnPlane => panic!("an on-plane side has no orientation bit"),
        }
        self
    }

    /// Index of the first differing bit, scanning from plane 0.
    pub fn first_difference(&self, other: &Self) -> Result<Option<usize>, GeometryError> {
        if self.len != other.len {
            return Err(GeometryError::LengthMismatch { left: self.len, right: other.len });
        }
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let x = a ^ b;
            if x != 0 {
                return Ok(Some(w * 64 + x.trailing_zeros() as usize));
            }
        }
        Ok(None)
    }

    pub fn signs(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.len).map(|j| self.get(j))
    }

    /// `1`/`0` per plane, plane 0 first.
    pub fn to_code_string(&self) -> String {
        (0..self.len).map(|j| if self.is_positive(j) { '1' } else { '0' }).collect()
    }

    pub fn from_code_string(s: &str) -> Option<Self> {
        let mut ov = Self::new();
        for ch in s.chars() {
            match ch {
                '1' => ov.push(true),
                '0' => ov.push(false),
                _ => return None,
            }
        }
        Some(ov)
    }
}

/// Equality with a short-circuit on the first differing word.
pub fn ov_equal(a: &OrientationVector, b: &OrientationVector) -> Result<bool, GeometryError> {
    Ok(a.first_difference(b)?.is_none())
}

/// Orientation vector of `point` against `planes`, in plane order.
pub fn compute_ov(point: &Point, planes: &[Hyperplane], rule: SideRule) -> Result<OrientationVector, GeometryError> {
    let mut ov = OrientationVector::new();
    for (j, plane) in planes.iter().enumerate() {
        match evaluate_side(&point.coords, plane, rule)?.side {
            Side::Positive => ov.push(true),
            Side::Negative => ov.push(false),
            Side::OnPlane => return Err(GeometryError::Incident { point: point.id, plane: j }),
        }
    }
    Ok(ov)
}

pub fn midpoint(a: &[f64], b: &[f64]) -> Result<Vec<f64>, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
}

pub fn manhattan_distance(a: &[f64], b: &[f64]) -> Result<f64, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plane(coeffs: &[f64]) -> Hyperplane {
        Hyperplane::new(0, coeffs.to_vec(), true)
    }

    #[test]
    fn side_examples() {
        let r = SideRule::default();
        let e = evaluate_side(&[2.0, 2.0], &plane(&[-1.0, 0.0]), r).unwrap();
        assert_eq!(e.value, -1.0);
        assert_eq!(e.side, Side::Negative);

        let e = evaluate_side(&[0.0, 0.0], &plane(&[3.0, -7.0]), r).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.side, Side::Positive);

        let e = evaluate_side(&[-1.0, 0.0], &plane(&[1.0, 0.0]), r).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.side, Side::OnPlane);
    }

    #[test]
    fn side_dimension_mismatch() {
        let err = evaluate_side(&[1.0], &plane(&[1.0, 1.0]), SideRule::default()).unwrap_err();
        assert_eq!(err, GeometryError::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn tau_resolves_band_to_positive() {
        let e = evaluate_side(&[-1.0, 0.0], &plane(&[1.0, 0.0]), SideRule::with_tau(TauMode::PiRatio)).unwrap();
        assert_eq!(e.side, Side::Positive);
        assert_eq!(TAU_PI_RATIO, 1.0);
    }

    #[test]
    fn band_is_relative() {
        // large cancelling terms widen the band to about 2e-3
        let p = plane(&[1.0, -1.0]);
        let x = [1e6, 1e6 + 1.0 - 1e-4];
        assert_eq!(evaluate_side(&x, &p, SideRule::default()).unwrap().side, Side::OnPlane);
        let x = [1e6, 1e6 + 1.0 - 1e-2];
        assert_eq!(evaluate_side(&x, &p, SideRule::default()).unwrap().side, Side::Positive);
        // the same offset near the origin is far outside the band
        let e = evaluate_side(&[-1.0 + 1e-4, 0.0], &plane(&[1.0, 0.0]), SideRule::default()).unwrap();
        assert_eq!(e.side, Side::Positive);
    }

    #[test]
    fn compute_ov_examples() {
        let planes = vec![plane(&[-0.2, 0.0]), plane(&[0.0, -0.2])];
        let a1 = Point::new(1, vec![2.0, 2.0]);
        assert_eq!(compute_ov(&a1, &planes, SideRule::default()).unwrap(), OrientationVector::from_signs(&[1, 1]));

        let origin = Point::new(2, vec![0.0, 0.0]);
        let ov = compute_ov(&origin, &planes, SideRule::default()).unwrap();
        assert!(ov.signs().all(|s| s == 1));

        let ov = compute_ov(&a1, &[], SideRule::default()).unwrap();
        assert!(ov.is_empty());

        let on = Point::new(3, vec![5.0, 1.0]);
        assert_eq!(
            compute_ov(&on, &planes, SideRule::default()).unwrap_err(),
            GeometryError::Incident { point: 3, plane: 0 }
        );
    }

    #[test]
    fn ov_equal_examples() {
        let a = OrientationVector::from_signs(&[1, -1, 1]);
        assert!(ov_equal(&a, &a.clone()).unwrap());

        let a = OrientationVector::from_signs(&[1, -1]);
        let b = OrientationVector::from_signs(&[-1, -1]);
        assert!(!ov_equal(&a, &b).unwrap());
        assert_eq!(a.first_difference(&b).unwrap(), Some(0));

        assert!(ov_equal(&OrientationVector::new(), &OrientationVector::new()).unwrap());

        let c = OrientationVector::from_signs(&[1]);
        assert!(matches!(ov_equal(&a, &c), Err(GeometryError::LengthMismatch { left: 2, right: 1 })));
    }

    #[test]
    fn append_bit_examples() {
        let ov = OrientationVector::from_signs(&[1]).append_bit(Side::Negative);
        assert_eq!(ov, OrientationVector::from_signs(&[1, -1]));
        let ov = OrientationVector::new().append_bit(Side::Positive);
        assert_eq!(ov, OrientationVector::from_signs(&[1]));
    }

    #[test]
    #[should_panic]
    fn append_on_plane_panics() {
        let _ = OrientationVector::new().append_bit(Side::OnPlane);
    }

    #[test]
    fn code_string_lists_plane_zero_first() {
        let ov = OrientationVector::from_signs(&[1, -1, 1]);
        assert_eq!(ov.to_code_string(), "101");
        assert_eq!(ov.words(), &[0b101]);
        assert_eq!(OrientationVector::from_code_string("101"), Some(ov.clone()));
        let mut flipped = ov;
        flipped.set(1, true);
        flipped.set(0, false);
        assert_eq!(flipped.to_code_string(), "011");
        assert!(OrientationVector::from_words(vec![0b1000], 3).is_none());
    }

    #[test]
    fn midpoint_and_distance_examples() {
        assert_eq!(midpoint(&[0.0, 0.0], &[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(midpoint(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let m = midpoint(&[1.0 / 3.0, 0.0], &[2.0 / 3.0, 1.0]).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-15 && m[1] == 0.5);
        assert!(midpoint(&[1.0], &[1.0, 2.0]).is_err());

        assert_eq!(manhattan_distance(&[1.0, 2.0], &[4.0, 0.0]).unwrap(), 5.0);
        assert_eq!(manhattan_distance(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(manhattan_distance(&[0.0; 7], &[1.0; 7]).unwrap(), 7.0);
        assert!(manhattan_distance(&[1.0], &[]).is_err());
    }

    #[test]
    fn counted_value_matches_and_counts() {
        let p = plane(&[1.5, -2.0, 0.25]);
        let mut ops = OpCount::default();
        let v = p.value_counted(&[1.0, 2.0, 4.0], &mut ops);
        assert_eq!(v, p.value(&[1.0, 2.0, 4.0]));
        assert_eq!(ops, OpCount { multiplications: 3, additions: 3 });
    }

    fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50i32..50, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 4.0).collect())
    }

    fn planes(n: usize) -> impl Strategy<Value = Vec<Hyperplane>> {
        prop::collection::vec(prop::collection::vec(-1000i32..1000, n), 0..12).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut c: Vec<f64> = r.into_iter().map(|x| x as f64 / 997.0 + 1e-3).collect();
                    c[0] += 0.013;
                    Hyperplane::new(i, c, true)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ov_bits_match_side_evaluation((p, r, pl) in (2usize..5).prop_flat_map(|n| (coords(n), coords(n), planes(n)))) {
            let rule = SideRule::default();
            let a = Point::new(0, p);
            let b = Point::new(1, r);
            let (Ok(oa), Ok(ob)) = (compute_ov(&a, &pl, rule), compute_ov(&b, &pl, rule)) else {
                return Ok(());
            };
            for (j, plane) in pl.iter().enumerate() {
                prop_assert_eq!(oa.get(j), evaluate_side(&a.coords, plane, rule).unwrap().side.signum());
            }
            // brute force: some plane puts the two on strictly opposite sides
            let opposite = pl.iter().any(|h| {
                let sa = evaluate_side(&a.coords, h, rule).unwrap().side.signum();
                let sb = evaluate_side(&b.coords, h, rule).unwrap().side.signum();
                sa * sb < 0
            });
            prop_assert_eq!(!ov_equal(&oa, &ob).unwrap(), opposite);
        }

        #[test]
        fn append_preserves_prefix(signs in prop::collection::vec(prop::bool::ANY, 0..200), extra in prop::bool::ANY) {
            let s: Vec<i8> = signs.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let ov = OrientationVector::from_signs(&s);
            let longer = ov.clone().append_bit(if extra { Side::Positive } else { Side::Negative });
            prop_assert_eq!(longer.len(), ov.len() + 1);
            for j in 0..ov.len() {
                prop_assert_eq!(longer.get(j), ov.get(j));
            }
            prop_assert_eq!(longer.is_positive(ov.len()), extra);
        }

        #[test]
        fn midpoint_is_equidistant((a, b) in (1usize..6).prop_flat_map(|n| (coords(n), coords(n)))) {
            let m = midpoint(&a, &b).unwrap();
            let da = manhattan_distance(&a, &m).unwrap();
            let db = manhattan_distance(&b, &m).unwrap();
            prop_assert!((da - db).abs() <= 1e-12 * (1.0 + da));
            let ea: f64 = a.iter().zip(&m).map(|(x, y)| (x - y).powi(2)).sum();
            let eb: f64 = b.iter().zip(&m).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!((ea - eb).abs() <= 1e-12 * (1.0 + ea));
        }
    }
}
