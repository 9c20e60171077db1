//! Exact truncated signatures of piecewise-linear paths.
//!
//! A linear segment with displacement `v` has signature `exp(v)`, whose level
//! `n` is `v^⊗n / n!`. The signature of a piecewise-linear path is the ordered
//! product of its segment exponentials (Chen's identity), so no quadrature is
//! involved.
//!
//! Paths whose increments are dyadic rationals (every axis witness path is)
//! take an exact route: with integer increments `n!·S_n` is an integer tensor,
//! so the product is formed in `i128` and each coefficient is rounded only at
//! the end. Cancellations such as `S_k(σ) - S_k(ρ) = 0` then hold exactly
//! instead of up to the rounding of coefficients of size `L^k/k!`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::factorial;
use crate::path::PiecewiseLinearPath;
use crate::tensor::{GroupTensor, TruncatedTensor, LEVEL0_TOL};
use crate::{Error, Result};

/// Shuffle discrepancy above which a tensor is reported as not group-like.
pub const GROUP_LIKE_TOL: f64 = 1e-9;

/// Combined word length below which every shuffle pair is checked.
pub const EXHAUSTIVE_WORD_LEN: usize = 4;

/// `exp(v)` truncated at `depth`: level `n` is `v^⊗n / n!`.
///
/// # Panics
///
/// If `v` is empty or the shape exceeds the coefficient budget.
pub fn exp_segment(v: &[f64], depth: usize) -> GroupTensor {
    let dim = v.len();
    let mut t = TruncatedTensor::identity(dim, depth).expect("valid segment shape");
    for n in 1..=depth {
        let prev = t.levels()[n - 1].clone();
        let inv = 1.0 / n as f64;
        let level = t.level_mut(n);
        for (a, &p) in prev.iter().enumerate() {
            for (b, &vb) in v.iter().enumerate() {
                level[a * dim + b] = p * vb * inv;
            }
        }
    }
    GroupTensor::from_trusted(t)
}

/// Largest power-of-two rescaling tried when looking for integer increments.
const MAX_DYADIC_SHIFT: i32 = 32;

/// Truncated signature as the ordered product of segment exponentials.
pub fn signature(path: &PiecewiseLinearPath, depth: usize) -> Result<GroupTensor> {
    GroupTensor::unit(path.dim(), depth)?;
    match lattice_signature(path, depth) {
        Some(exact) => Ok(exact),
        None => float_signature(path, depth),
    }
}

fn float_signature(path: &PiecewiseLinearPath, depth: usize) -> Result<GroupTensor> {
    let mut acc = GroupTensor::unit(path.dim(), depth)?;
    for v in path.segments() {
        if v.iter().all(|&c| c == 0.0) {
            continue;
        }
        acc = acc.mul(&exp_segment(v, depth))?;
    }
    Ok(acc)
}

/// Smallest `s` with every coordinate of `segments` times `2^s` an integer of
/// magnitude below `2^53`.
fn dyadic_shift(segments: &[Vec<f64>]) -> Option<i32> {
    let mut shift = 0;
    for &x in segments.iter().flatten() {
        if !x.is_finite() {
            return None;
        }
        while libm::trunc(libm::ldexp(x, shift)) != libm::ldexp(x, shift) {
            shift += 1;
            if shift > MAX_DYADIC_SHIFT {
                return None;
            }
        }
    }
    let limit = libm::ldexp(1.0, 53);
    segments
        .iter()
        .flatten()
        .all(|&x| libm::fabs(libm::ldexp(x, shift)) < limit)
        .then_some(shift)
}

/// Exact signature of a path with dyadic increments, or `None` when the
/// increments are not dyadic or an intermediate integer overflows.
fn lattice_signature(path: &PiecewiseLinearPath, depth: usize) -> Option<GroupTensor> {
    let shift = dyadic_shift(path.segments())?;
    let d = path.dim();
    let binom = binomials(depth)?;
    // acc[n] = n! 2^{sn} S_n, integer-valued
    let mut acc: Vec<Vec<i128>> = (0..=depth).map(|n| vec![0i128; d.pow(n as u32)]).collect();
    acc[0][0] = 1;
    for v in path.segments() {
        let lattice: Vec<i128> = v.iter().map(|&x| libm::ldexp(x, shift) as i128).collect();
        if lattice.iter().all(|&x| x == 0) {
            continue;
        }
        // powers[j] = v^{⊗j}
        let mut powers: Vec<Vec<i128>> = vec![vec![1]];
        for j in 1..=depth {
            let prev = &powers[j - 1];
            let mut next = Vec::with_capacity(prev.len() * d);
            for &p in prev {
                for &x in &lattice {
                    next.push(p.checked_mul(x)?);
                }
            }
            powers.push(next);
        }
        let mut out: Vec<Vec<i128>> = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let mut level = vec![0i128; d.pow(n as u32)];
            for i in 0..=n {
                let c = binom[n][i];
                let (a, p) = (&acc[i], &powers[n - i]);
                let width = p.len();
                for (ai, &x) in a.iter().enumerate() {
                    if x == 0 {
                        continue;
                    }
                    let cx = c.checked_mul(x)?;
                    for (slot, &y) in level[ai * width..(ai + 1) * width].iter_mut().zip(p) {
                        *slot = slot.checked_add(cx.checked_mul(y)?)?;
                    }
                }
            }
            out.push(level);
        }
        acc = out;
    }
    let levels = acc
        .iter()
        .enumerate()
        .map(|(n, level)| {
            let denom = factorial(n);
            level
                .iter()
                .map(|&x| libm::ldexp(x as f64 / denom, -shift * n as i32))
                .collect()
        })
        .collect();
    Some(GroupTensor::from_trusted(TruncatedTensor::from_levels(d, levels).ok()?))
}

fn binomials(depth: usize) -> Option<Vec<Vec<i128>>> {
    let mut rows: Vec<Vec<i128>> = vec![vec![1]];
    for n in 1..=depth {
        let prev = &rows[n - 1];
        let mut row = vec![1i128; n + 1];
        for i in 1..n {
            row[i] = prev[i - 1].checked_add(prev[i])?;
        }
        rows.push(row);
    }
    Some(rows)
}

/// `log(signature(path))`; its level 0 is zero.
pub fn log_signature(path: &PiecewiseLinearPath, depth: usize) -> Result<TruncatedTensor> {
    signature(path, depth)?.log()
}

/// Outcome of [`check_group_like`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLikeReport {
    pub pairs_checked: usize,
    pub max_discrepancy: f64,
    /// Word pair attaining `max_discrepancy`, if any pair was checked.
    pub worst_pair: Option<(Vec<usize>, Vec<usize>)>,
    pub passed: bool,
}

/// Checks the shuffle relations `⟨x, u ⧢ w⟩ = ⟨x, u⟩⟨x, w⟩`.
///
/// Every pair of non-empty words with `|u| + |w| ≤ min(depth, 4)` is checked,
/// then `random_pairs` further pairs of combined length up to `depth`, drawn
/// from a stream seeded with `seed`. Passes when the largest absolute
/// discrepancy is at most [`GROUP_LIKE_TOL`].
pub fn check_group_like(x: &TruncatedTensor, random_pairs: usize, seed: u64) -> Result<GroupLikeReport> {
    let found = x.scalar();
    if (found - 1.0).abs() > LEVEL0_TOL {
        return Err(Error::LevelZero {
            expected: 1.0,
            found,
        });
    }
    let mut report = GroupLikeReport {
        pairs_checked: 0,
        max_discrepancy: 0.0,
        worst_pair: None,
        passed: true,
    };
    let mut record = |u: &[usize], w: &[usize]| -> Result<()> {
        let (shuffled, product) = x.shuffle_pairing(u, w)?;
        let gap = (shuffled - product).abs();
        report.pairs_checked += 1;
        if gap > report.max_discrepancy || report.worst_pair.is_none() {
            report.max_discrepancy = f64::max(gap, report.max_discrepancy);
            report.worst_pair = Some((u.to_vec(), w.to_vec()));
        }
        Ok(())
    };

    let dim = x.dim();
    let limit = x.depth().min(EXHAUSTIVE_WORD_LEN);
    for total in 2..=limit {
        for left_len in 1..total {
            for u in words_of_length(dim, left_len) {
                for w in words_of_length(dim, total - left_len) {
                    record(&u, &w)?;
                }
            }
        }
    }

    if x.depth() >= 2 && random_pairs > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_pairs {
            let total = rng.random_range(2..=x.depth());
            let left_len = rng.random_range(1..total);
            let u: Vec<usize> = (0..left_len).map(|_| rng.random_range(1..=dim)).collect();
            let w: Vec<usize> = (0..total - left_len).map(|_| rng.random_range(1..=dim)).collect();
            record(&u, &w)?;
        }
    }

    report.passed = report.max_discrepancy <= GROUP_LIKE_TOL;
    Ok(report)
}

/// All words of length `len` over `1..=dim`, lexicographic.
pub fn words_of_length(dim: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (1..=dim).map(move |letter| {
                    let mut next = w.clone();
                    next.push(letter);
                    next
                })
            })
            .collect();
    }
    out
}
