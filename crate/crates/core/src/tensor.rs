//! Dense truncated tensor algebra `T^(N)(R^d) = R ⊕ R^d ⊕ (R^d)^⊗2 ⊕ … ⊕ (R^d)^⊗N`.
//!
//! Level `k` is stored as a flat row-major array of `d^k` coefficients: the
//! coefficient of the word `(i_1, …, i_k)` (letters `1..=d`) sits at
//! `Σ_j (i_j - 1) d^(k-j)`. Level 0 is a single scalar.
//!
//! Words in the public API use 1-based letters, so `e1 ⊗ e2` is the word
//! `[1, 2]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::linalg::checked_pow;
use crate::{Error, Result};

/// Largest total coefficient count a tensor may hold.
pub const MAX_COEFFICIENTS: usize = 1 << 22;

/// Tolerance on the level-0 preconditions of `exp`, `log` and `inverse_psi`.
pub const LEVEL0_TOL: f64 = 1e-12;

/// Total number of coefficients `Σ_{k≤depth} dim^k`, if it fits the budget.
pub fn coefficient_count(dim: usize, depth: usize) -> Option<usize> {
    let mut total: usize = 0;
    for k in 0..=depth {
        total = total.checked_add(checked_pow(dim, k)?)?;
    }
    (total <= MAX_COEFFICIENTS).then_some(total)
}

fn check_shape(dim: usize, depth: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    coefficient_count(dim, depth).ok_or(Error::DepthTooLarge { dim, depth })?;
    Ok(())
}

/// Dense element of the truncated tensor algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TryFrom<TensorRepr> for TruncatedTensor {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Self> {
        if repr.levels.len() != repr.depth + 1 {
            return Err(Error::ShapeMismatch(format!(
                "depth {} needs {} levels, found {}",
                repr.depth,
                repr.depth + 1,
                repr.levels.len()
            )));
        }
        TruncatedTensor::from_levels(repr.dim, repr.levels)
    }
}

impl From<TruncatedTensor> for TensorRepr {
    fn from(t: TruncatedTensor) -> Self {
        TensorRepr {
            dim: t.dim,
            depth: t.depth,
            levels: t.levels,
        }
    }
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, depth: usize) -> Result<Self> {
        check_shape(dim, depth)?;
        let mut levels = Vec::with_capacity(depth + 1);
        let mut size = 1;
        for _ in 0..=depth {
            levels.push(vec![0.0; size]);
            size *= dim;
        }
        Ok(TruncatedTensor { dim, depth, levels })
    }

    /// The identity `1 = (1, 0, 0, …)`.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        let mut t = Self::zeros(dim, depth)?;
        t.levels[0][0] = 1.0;
        Ok(t)
    }

    /// Builds a tensor from explicit levels; `levels[k]` must hold `dim^k`
    /// finite coefficients.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::ShapeMismatch("at least level 0 is required".into()));
        }
        let depth = levels.len() - 1;
        check_shape(dim, depth)?;
        let mut size = 1;
        for (k, level) in levels.iter().enumerate() {
            if level.len() != size {
                return Err(Error::ShapeMismatch(format!(
                    "level {k} has {} coefficients, expected {size}",
                    level.len()
                )));
            }
            if level.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite);
            }
            size *= dim;
        }
        Ok(TruncatedTensor { dim, depth, levels })
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn from_flat(dim: usize, depth: usize, coefficients: &[f64]) -> Result<Self> {
        let total = coefficient_count(dim, depth).ok_or(Error::DepthTooLarge { dim, depth })?;
        if coefficients.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "expected {total} coefficients, found {}",
                coefficients.len()
            )));
        }
        let mut levels = Vec::with_capacity(depth + 1);
        let mut offset = 0;
        let mut size = 1;
        for _ in 0..=depth {
            levels.push(coefficients[offset..offset + size].to_vec());
            offset += size;
            size *= dim;
        }
        Self::from_levels(dim, levels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Result<&[f64]> {
        self.levels
            .get(k)
            .map(Vec::as_slice)
            .ok_or(Error::LevelOutOfRange {
                level: k,
                depth: self.depth,
            })
    }

    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    pub(crate) fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    /// All coefficients, level-ascending, each level row-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }

    fn word_index(&self, word: &[usize]) -> Result<usize> {
        let mut index = 0;
        for &letter in word {
            if letter == 0 || letter > self.dim {
                return Err(Error::BadLetter {
                    letter,
                    dim: self.dim,
                });
            }
            index = index * self.dim + (letter - 1);
        }
        Ok(index)
    }

    /// `⟨x, word⟩`; the empty word reads level 0.
    pub fn coefficient(&self, word: &[usize]) -> Result<f64> {
        if word.len() > self.depth {
            return Err(Error::WordTooLong {
                len: word.len(),
                depth: self.depth,
            });
        }
        let index = self.word_index(word)?;
        Ok(self.levels[word.len()][index])
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.depth != other.depth {
            return Err(Error::ShapeMismatch(format!(
                "(dim {}, depth {}) vs (dim {}, depth {})",
                self.dim, self.depth, other.dim, other.depth
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: f64) -> Self {
        TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Truncated tensor product: level `k` is `Σ_{i+j=k} x_i ⊗ y_j`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d, self.depth).expect("shape already validated");
        for k in 0..=self.depth {
            let target = &mut out.levels[k];
            for i in 0..=k {
                let xi = &self.levels[i];
                let yj = &other.levels[k - i];
                let width = yj.len();
                for (a, &xa) in xi.iter().enumerate() {
                    if xa == 0.0 {
                        continue;
                    }
                    let row = &mut target[a * width..(a + 1) * width];
                    for (t, &yb) in row.iter_mut().zip(yj) {
                        *t += xa * yb;
                    }
                }
            }
        }
        out
    }

    fn require_level0(&self, expected: f64) -> Result<()> {
        let found = self.scalar();
        if (found - expected).abs() > LEVEL0_TOL {
            return Err(Error::LevelZero { expected, found });
        }
        Ok(())
    }

    /// `Σ_{n≤depth} x^n / n!`; requires level 0 to vanish.
    pub fn exp(&self) -> Result<Self> {
        self.require_level0(0.0)?;
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        let mut result = Self::identity(self.dim, self.depth)?;
        let mut term = result.clone();
        for n in 1..=self.depth {
            term = term.mul_unchecked(&x).scale(1.0 / n as f64);
            result = result.add(&term)?;
        }
        Ok(result)
    }

    /// `Σ_{n=1}^{depth} (-1)^{n+1} (x - 1)^n / n`; requires level 0 to equal 1.
    pub fn log(&self) -> Result<Self> {
        self.require_level0(1.0)?;
        let mut y = self.clone();
        y.levels[0][0] = 0.0;
        let mut result = Self::zeros(self.dim, self.depth)?;
        let mut power = y.clone();
        for n in 1..=self.depth {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            result = result.add(&power.scale(sign / n as f64))?;
            power = power.mul_unchecked(&y);
        }
        Ok(result)
    }

    /// The inversion map `ψ(a) = 1 + Σ_{n≥1} (0, -a_1, -a_2, …)^n`, truncated
    /// after `depth` terms. Requires level 0 to equal 1; on such tensors it is
    /// the two-sided multiplicative inverse.
    pub fn inverse_psi(&self) -> Result<Self> {
        self.require_level0(1.0)?;
        let mut neg = self.scale(-1.0);
        neg.levels[0][0] = 0.0;
        let mut result = Self::identity(self.dim, self.depth)?;
        let mut power = neg.clone();
        for _ in 1..=self.depth {
            result = result.add(&power)?;
            power = power.mul_unchecked(&neg);
        }
        Ok(result)
    }

    /// Canonical projection onto levels `0..=n`.
    pub fn project(&self, n: usize) -> Result<Self> {
        if n > self.depth {
            return Err(Error::LevelOutOfRange {
                level: n,
                depth: self.depth,
            });
        }
        Ok(TruncatedTensor {
            dim: self.dim,
            depth: n,
            levels: self.levels[..=n].to_vec(),
        })
    }

    /// Hilbert–Schmidt norm of level `k`.
    pub fn level_norm(&self, k: usize) -> Result<f64> {
        let level = self.level(k)?;
        Ok(libm::sqrt(level.iter().map(|c| c * c).sum()))
    }

    /// `Σ_k 2^{-k} min(1, ‖x_k - y_k‖)`, a metric for the product topology.
    pub fn product_metric(&self, other: &Self) -> Result<f64> {
        let diff = self.sub(other)?;
        let mut weight = 1.0;
        let mut total = 0.0;
        for k in 0..=self.depth {
            total += weight * f64::min(1.0, diff.level_norm(k)?);
            weight *= 0.5;
        }
        Ok(total)
    }

    /// Adjacent-pair contraction of level `2n`:
    /// `φ(u_1 ⊗ … ⊗ u_2n) = ⟨u_1,u_2⟩ ⋯ ⟨u_{2n-1},u_{2n}⟩`, extended linearly.
    pub fn phi_contraction(&self, n: usize) -> Result<f64> {
        let level = self.level(2 * n)?;
        let d = self.dim;
        // (i, i) at base d^2 has offset i * (d + 1)
        let mut digits = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let index = digits.iter().fold(0, |acc, &i| acc * d * d + i * (d + 1));
            total += level[index];
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(total);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < d {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// Returns `(⟨x, u ⧢ w⟩, ⟨x, u⟩ ⟨x, w⟩)`. Group-like tensors make the two
    /// components equal.
    pub fn shuffle_pairing(&self, u: &[usize], w: &[usize]) -> Result<(f64, f64)> {
        let len = u.len() + w.len();
        if len > self.depth {
            return Err(Error::WordTooLong {
                len,
                depth: self.depth,
            });
        }
        let left = self.coefficient(u)?;
        let right = self.coefficient(w)?;
        let mut shuffled = 0.0;
        for word in shuffle_product(u, w) {
            shuffled += self.coefficient(&word)?;
        }
        Ok((shuffled, left * right))
    }
}

/// All interleavings of `u` and `w`, with multiplicity.
pub fn shuffle_product(u: &[usize], w: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(u.len() + w.len());
    shuffle_into(u, w, &mut buf, &mut out);
    out
}

fn shuffle_into(u: &[usize], w: &[usize], buf: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    match (u.split_first(), w.split_first()) {
        (None, None) => out.push(buf.clone()),
        (Some((&a, rest)), None) | (None, Some((&a, rest))) => {
            buf.push(a);
            shuffle_into(rest, &[], buf, out);
            buf.pop();
        }
        (Some((&a, u_rest)), Some((&b, w_rest))) => {
            buf.push(a);
            shuffle_into(u_rest, w, buf, out);
            buf.pop();
            buf.push(b);
            shuffle_into(u, w_rest, buf, out);
            buf.pop();
        }
    }
}

/// A truncated tensor with unit scalar part that is (up to rounding) group-like,
/// i.e. a truncated signature. Built by [`crate::signature`], products and
/// inverses of such elements, or [`GroupTensor::try_new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TruncatedTensor", into = "TruncatedTensor")]
pub struct GroupTensor(TruncatedTensor);

impl GroupTensor {
    pub fn unit(dim: usize, depth: usize) -> Result<Self> {
        TruncatedTensor::identity(dim, depth).map(GroupTensor)
    }

    /// Accepts `t` if its scalar part is 1 and it passes the exhaustive part of
    /// [`crate::signature::check_group_like`].
    pub fn try_new(t: TruncatedTensor) -> Result<Self> {
        t.require_level0(1.0)?;
        let report = crate::signature::check_group_like(&t, 0, 0)?;
        if !report.passed {
            return Err(Error::InvalidParameter(format!(
                "tensor is not group-like (shuffle discrepancy {:e})",
                report.max_discrepancy
            )));
        }
        Ok(GroupTensor(t))
    }

    pub(crate) fn from_trusted(t: TruncatedTensor) -> Self {
        debug_assert!(t.scalar() == 1.0);
        GroupTensor(t)
    }

    pub fn as_tensor(&self) -> &TruncatedTensor {
        &self.0
    }

    pub fn into_inner(self) -> TruncatedTensor {
        self.0
    }

    pub fn mul(&self, other: &GroupTensor) -> Result<GroupTensor> {
        self.0.mul(&other.0).map(GroupTensor)
    }

    /// Group inverse, i.e. [`TruncatedTensor::inverse_psi`].
    pub fn inverse(&self) -> GroupTensor {
        GroupTensor(self.0.inverse_psi().expect("scalar part is one"))
    }

    pub fn project(&self, n: usize) -> Result<GroupTensor> {
        self.0.project(n).map(GroupTensor)
    }
}

impl Deref for GroupTensor {
    type Target = TruncatedTensor;

    fn deref(&self) -> &TruncatedTensor {
        &self.0
    }
}

impl TryFrom<TruncatedTensor> for GroupTensor {
    type Error = Error;

    fn try_from(t: TruncatedTensor) -> Result<Self> {
        GroupTensor::try_new(t)
    }
}

impl From<GroupTensor> for TruncatedTensor {
    fn from(g: GroupTensor) -> Self {
        g.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::exp_segment;
    use proptest::prelude::*;

    fn tensor_from(dim: usize, depth: usize, seed: &[f64]) -> TruncatedTensor {
        let n = coefficient_count(dim, depth).unwrap();
        let coeffs: Vec<f64> = (0..n).map(|i| seed[i % seed.len()] * (1.0 + i as f64 * 0.01)).collect();
        TruncatedTensor::from_flat(dim, depth, &coeffs).unwrap()
    }

    #[test]
    fn unit_has_only_scalar_part() {
        let u = GroupTensor::unit(2, 3).unwrap();
        assert_eq!(u.levels()[0], vec![1.0]);
        assert_eq!(u.levels()[1], vec![0.0; 2]);
        assert_eq!(u.levels()[2], vec![0.0; 4]);
        assert_eq!(u.levels()[3], vec![0.0; 8]);
        assert_eq!(u.inverse(), u);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert_eq!(TruncatedTensor::zeros(0, 2), Err(Error::ZeroDimension));
        assert!(matches!(
            TruncatedTensor::zeros(4, 40),
            Err(Error::DepthTooLarge { .. })
        ));
        let err = TruncatedTensor::from_levels(2, vec![vec![1.0], vec![0.0; 3]]);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
        let err = TruncatedTensor::from_levels(2, vec![vec![f64::NAN]]);
        assert_eq!(err, Err(Error::NonFinite));
        let a = TruncatedTensor::zeros(2, 2).unwrap();
        let b = TruncatedTensor::zeros(3, 2).unwrap();
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(a.mul(&b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn scale_and_additive_inverse() {
        let u = TruncatedTensor::identity(2, 2).unwrap();
        assert_eq!(u.scale(3.0).flatten(), vec![3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let x = tensor_from(2, 3, &[0.3, -1.2, 2.5]);
        let zero = x.add(&x.scale(-1.0)).unwrap();
        assert!(zero.flatten().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn exp_of_zero_is_unit_and_log_of_letter_is_primitive() {
        let z = TruncatedTensor::zeros(2, 3).unwrap();
        assert_eq!(z.exp().unwrap(), TruncatedTensor::identity(2, 3).unwrap());

        let mut v = TruncatedTensor::zeros(2, 2).unwrap();
        v.level_mut(1).copy_from_slice(&[0.7, -1.3]);
        let back = v.exp().unwrap().log().unwrap();
        assert!(back.max_abs_diff(&v).unwrap() < 1e-15);
        assert!(back.level(2).unwrap().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn level0_preconditions() {
        let u = TruncatedTensor::identity(2, 2).unwrap();
        assert!(matches!(u.exp(), Err(Error::LevelZero { .. })));
        let z = TruncatedTensor::zeros(2, 2).unwrap();
        assert!(matches!(z.log(), Err(Error::LevelZero { .. })));
        assert!(matches!(z.inverse_psi(), Err(Error::LevelZero { .. })));
    }

    #[test]
    fn project_bounds() {
        let x = tensor_from(2, 3, &[1.0, 2.0]);
        assert_eq!(x.project(3).unwrap(), x);
        let p0 = x.project(0).unwrap();
        assert_eq!(p0.depth(), 0);
        assert_eq!(p0.flatten(), vec![x.scalar()]);
        assert!(matches!(x.project(4), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn product_metric_of_unit_and_segment() {
        let one = TruncatedTensor::identity(2, 2).unwrap();
        let e1 = exp_segment(&[1.0, 0.0], 2);
        let d = one.product_metric(&e1).unwrap();
        assert!((d - 0.625).abs() < 1e-15);
        assert_eq!(e1.product_metric(&e1).unwrap(), 0.0);
    }

    #[test]
    fn phi_contraction_on_basis_words() {
        let one = TruncatedTensor::identity(2, 4).unwrap();
        assert_eq!(one.phi_contraction(1).unwrap(), 0.0);
        assert_eq!(one.phi_contraction(2).unwrap(), 0.0);

        let mut x = TruncatedTensor::zeros(2, 4).unwrap();
        let i = x.word_index(&[1, 1, 2, 2]).unwrap();
        x.level_mut(4)[i] = 1.0;
        assert_eq!(x.phi_contraction(2).unwrap(), 1.0);

        let mut y = TruncatedTensor::zeros(2, 4).unwrap();
        let j = y.word_index(&[1, 2, 1, 2]).unwrap();
        y.level_mut(4)[j] = 1.0;
        assert_eq!(y.phi_contraction(2).unwrap(), 0.0);

        let v = [0.6, -0.8, 2.0];
        let s = exp_segment(&v, 2);
        assert!((s.phi_contraction(1).unwrap() - (0.36 + 0.64 + 4.0) / 2.0).abs() < 1e-15);
        assert!(matches!(s.phi_contraction(2), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn shuffle_pairing_cases() {
        let one = TruncatedTensor::identity(2, 3).unwrap();
        assert_eq!(one.shuffle_pairing(&[1], &[2]).unwrap(), (0.0, 0.0));
        assert_eq!(one.shuffle_pairing(&[1, 2], &[2]).unwrap(), (0.0, 0.0));

        let mut x = TruncatedTensor::identity(2, 2).unwrap();
        let i = x.word_index(&[1, 2]).unwrap();
        x.level_mut(2)[i] = 1.0;
        assert_eq!(x.shuffle_pairing(&[1], &[2]).unwrap(), (1.0, 0.0));

        assert!(matches!(
            x.shuffle_pairing(&[1, 2], &[1]),
            Err(Error::WordTooLong { .. })
        ));
        assert!(matches!(
            x.shuffle_pairing(&[3], &[1]),
            Err(Error::BadLetter { .. })
        ));
        assert!(matches!(
            x.shuffle_pairing(&[0], &[1]),
            Err(Error::BadLetter { .. })
        ));
    }

    #[test]
    fn shuffle_product_counts() {
        assert_eq!(shuffle_product(&[1], &[2]), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(shuffle_product(&[1, 2], &[3, 4]).len(), 6);
        assert_eq!(shuffle_product(&[], &[1, 1]), vec![vec![1, 1]]);
    }

    fn arb_tensor(dim: usize, depth: usize, scalar: Option<f64>) -> impl Strategy<Value = TruncatedTensor> {
        let n = coefficient_count(dim, depth).unwrap();
        proptest::collection::vec(-2.0f64..2.0, n).prop_map(move |mut c| {
            if let Some(s) = scalar {
                c[0] = s;
            }
            TruncatedTensor::from_flat(dim, depth, &c).unwrap()
        })
    }

    fn shape() -> impl Strategy<Value = (usize, usize)> {
        (1usize..=3, 0usize..=5)
    }

    proptest! {
        #[test]
        fn mul_is_associative(
            (x, y, z) in shape().prop_flat_map(|(d, n)| (arb_tensor(d, n, None), arb_tensor(d, n, None), arb_tensor(d, n, None)))
        ) {
            let left = x.mul(&y).unwrap().mul(&z).unwrap();
            let right = x.mul(&y.mul(&z).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-12 * 64.0);
        }

        #[test]
        fn unit_laws_and_commutative_add(
            (x, y) in shape().prop_flat_map(|(d, n)| (arb_tensor(d, n, None), arb_tensor(d, n, None)))
        ) {
            let one = TruncatedTensor::identity(x.dim(), x.depth()).unwrap();
            prop_assert_eq!(one.mul(&x).unwrap(), x.clone());
            prop_assert_eq!(x.mul(&one).unwrap(), x.clone());
            prop_assert_eq!(x.add(&y).unwrap(), y.add(&x).unwrap());
        }

        #[test]
        fn inverse_psi_is_two_sided(
            x in shape().prop_flat_map(|(d, n)| arb_tensor(d, n, Some(1.0)))
        ) {
            let inv = x.inverse_psi().unwrap();
            let one = TruncatedTensor::identity(x.dim(), x.depth()).unwrap();
            let scale = x.flatten().iter().fold(1.0f64, |m, c| m.max(c.abs())).powi(x.depth() as i32);
            prop_assert!(x.mul(&inv).unwrap().max_abs_diff(&one).unwrap() <= 1e-12 * scale.max(1.0) * 1e3);
            prop_assert!(inv.mul(&x).unwrap().max_abs_diff(&one).unwrap() <= 1e-12 * scale.max(1.0) * 1e3);
        }

        #[test]
        fn exp_log_round_trip(
            x in shape().prop_flat_map(|(d, n)| arb_tensor(d, n, Some(0.0))).prop_map(|t| t.scale(0.25))
        ) {
            let back = x.exp().unwrap().log().unwrap();
            prop_assert!(back.max_abs_diff(&x).unwrap() <= 1e-10);
            let g = x.exp().unwrap();
            prop_assert!(g.log().unwrap().exp().unwrap().max_abs_diff(&g).unwrap() <= 1e-10);
        }

        #[test]
        fn projection_commutes_with_mul(
            (x, y, n) in shape().prop_flat_map(|(d, depth)| (arb_tensor(d, depth, None), arb_tensor(d, depth, None), 0..=depth))
        ) {
            let lhs = x.mul(&y).unwrap().project(n).unwrap();
            let rhs = x.project(n).unwrap().mul(&y.project(n).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn product_metric_axioms(
            (x, y, z) in shape().prop_flat_map(|(d, n)| (arb_tensor(d, n, None), arb_tensor(d, n, None), arb_tensor(d, n, None)))
        ) {
            let dxy = x.product_metric(&y).unwrap();
            prop_assert_eq!(dxy, y.product_metric(&x).unwrap());
            prop_assert_eq!(x.product_metric(&x).unwrap(), 0.0);
            let dxz = x.product_metric(&z).unwrap();
            let dzy = z.product_metric(&y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-12);
        }

        #[test]
        fn phi_is_linear(
            (x, y, n) in (1usize..=3, 2usize..=6).prop_flat_map(|(d, depth)| (arb_tensor(d, depth, None), arb_tensor(d, depth, None), 1..=depth / 2)),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let combo = x.scale(a).add(&y.scale(b)).unwrap();
            let lhs = combo.phi_contraction(n).unwrap();
            let rhs = a * x.phi_contraction(n).unwrap() + b * y.phi_contraction(n).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * 100.0);
        }
    }
}
