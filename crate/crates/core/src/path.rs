//! Piecewise-linear paths in `R^d` starting at the origin.
//!
//! A path is stored as its list of segment displacements `v_1, …, v_m`. The
//! parameterisation is always constant speed: segment `i` is traversed over
//! `[t_{i-1}, t_i]` with `t_i = (|v_1| + … + |v_i|) / L`. Zero segments occupy
//! no time.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{add, dot, norm, scaled, sub};
use crate::{Error, Result};

/// Relative tolerance of the collinearity test used by [`PiecewiseLinearPath::reduce`].
pub const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct PiecewiseLinearPath {
    dim: usize,
    segments: Vec<Vec<f64>>,
    // cache: known to be tree-reduced
    reduced: bool,
}

/// Equality of segment lists; the reduction cache is ignored.
impl PartialEq for PiecewiseLinearPath {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.segments == other.segments
    }
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    dim: usize,
    segments: Vec<Vec<f64>>,
}

impl TryFrom<PathRepr> for PiecewiseLinearPath {
    type Error = Error;

    fn try_from(repr: PathRepr) -> Result<Self> {
        PiecewiseLinearPath::new(repr.dim, repr.segments)
    }
}

impl From<PiecewiseLinearPath> for PathRepr {
    fn from(p: PiecewiseLinearPath) -> Self {
        PathRepr {
            dim: p.dim,
            segments: p.segments,
        }
    }
}

impl PiecewiseLinearPath {
    pub fn new(dim: usize, segments: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for (i, v) in segments.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "segment {i} has {} components, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(PiecewiseLinearPath {
            dim,
            segments,
            reduced: false,
        })
    }

    /// The constant path `o`.
    pub fn constant(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        PiecewiseLinearPath {
            dim,
            segments: Vec::new(),
            reduced: true,
        }
    }

    /// The linear path `γ_v` with derivative `v`.
    ///
    /// # Panics
    ///
    /// If `v` is empty or has non-finite entries.
    pub fn linear(v: &[f64]) -> Self {
        Self::new(v.len(), vec![v.to_vec()]).expect("valid displacement")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Vec<f64>] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// True for outputs of [`reduce`](Self::reduce).
    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|v| norm(v)).sum()
    }

    pub fn endpoint(&self) -> Vec<f64> {
        self.segments
            .iter()
            .fold(vec![0.0; self.dim], |acc, v| add(&acc, v))
    }

    /// Vertices `x_0 = 0, x_1, …, x_m`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(vec![0.0; self.dim]);
        for v in &self.segments {
            let next = add(out.last().expect("non-empty"), v);
            out.push(next);
        }
        out
    }

    /// Constant-speed breakpoints `t_0 = 0, …, t_m = 1`. For a path of zero
    /// length every breakpoint is 0.
    pub fn breakpoints(&self) -> Vec<f64> {
        let total = self.length();
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(0.0);
        if total == 0.0 {
            out.extend(self.segments.iter().map(|_| 0.0));
            return out;
        }
        let mut acc = 0.0;
        for v in &self.segments {
            acc += norm(v);
            out.push(acc / total);
        }
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "cannot concatenate dim {} with dim {}",
                self.dim, other.dim
            )));
        }
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        Ok(PiecewiseLinearPath {
            dim: self.dim,
            segments,
            reduced: false,
        })
    }

    /// `←γ_t = γ_{1-t} - γ_1`: segments reversed and negated.
    pub fn reverse(&self) -> Self {
        PiecewiseLinearPath {
            dim: self.dim,
            segments: self.segments.iter().rev().map(|v| scaled(v, -1.0)).collect(),
            reduced: self.reduced,
        }
    }

    /// Multiplies every segment by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        PiecewiseLinearPath {
            dim: self.dim,
            segments: self.segments.iter().map(|v| scaled(v, lambda)).collect(),
            reduced: self.reduced && lambda != 0.0,
        }
    }

    /// Drops zero segments and merges adjacent collinear segments (either
    /// orientation) until no such pair remains. Positive merges only change
    /// the parameterisation; opposite merges delete a tree-like excursion.
    pub fn reduce(&self) -> Self {
        let mut stack: Vec<Vec<f64>> = Vec::with_capacity(self.segments.len());
        for v in &self.segments {
            if v.iter().all(|&c| c == 0.0) {
                continue;
            }
            let mut current = v.clone();
            while let Some(top) = stack.last() {
                if !collinear(top, &current) {
                    break;
                }
                let scale = norm(top) + norm(&current);
                let merged = add(top, &current);
                stack.pop();
                if norm(&merged) <= COLLINEAR_TOL * scale {
                    current.clear();
                    break;
                }
                current = merged;
            }
            if !current.is_empty() {
                stack.push(current);
            }
        }
        PiecewiseLinearPath {
            dim: self.dim,
            segments: stack,
            reduced: true,
        }
    }

    /// The same path without zero segments; since the parameterisation is
    /// always constant speed, nothing else changes.
    pub fn constant_speed(&self) -> Self {
        PiecewiseLinearPath {
            dim: self.dim,
            segments: self
                .segments
                .iter()
                .filter(|v| v.iter().any(|&c| c != 0.0))
                .cloned()
                .collect(),
            reduced: self.reduced,
        }
    }

    /// Position at time `t ∈ [0, 1]` under the constant-speed parameterisation.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let bp = self.breakpoints();
        let vertices = self.vertices();
        Ok(evaluate_with(&bp, &vertices, &self.segments, t))
    }

    /// `Σ |v_i|`, the exact 1-variation.
    pub fn one_variation(&self) -> f64 {
        self.length()
    }

    /// The difference `a - b` of the constant-speed parameterisations, as a
    /// piecewise-linear path on the common refinement of both breakpoint grids.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "dim {} vs dim {}",
                self.dim, other.dim
            )));
        }
        let (bp_a, bp_b) = (self.breakpoints(), other.breakpoints());
        let (va, vb) = (self.vertices(), other.vertices());
        let mut grid: Vec<f64> = bp_a.iter().chain(&bp_b).copied().chain([0.0, 1.0]).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut prev = vec![0.0; self.dim];
        let mut segments = Vec::with_capacity(grid.len());
        for &t in &grid[1..] {
            let a = evaluate_with(&bp_a, &va, &self.segments, t);
            let b = evaluate_with(&bp_b, &vb, &other.segments, t);
            let delta = sub(&a, &b);
            segments.push(sub(&delta, &prev));
            prev = delta;
        }
        Self::new(self.dim, segments)
    }

    /// `‖a - b‖_1` for the constant-speed parameterisations, exact on the
    /// common refinement.
    pub fn one_variation_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.difference(other)?.one_variation())
    }

    /// `sup_t |γ_t|`, attained at a vertex.
    pub fn sup_norm(&self) -> f64 {
        self.vertices().iter().map(|x| norm(x)).fold(0.0, f64::max)
    }

    /// `‖γ‖_p = (sup_D Σ |γ_{t_i} - γ_{t_{i-1}}|^p)^{1/p}`. Optimal partitions
    /// of a piecewise-linear path only use vertices (each summand is convex
    /// along a segment), so an `O(m²)` dynamic programme over vertices is exact.
    pub fn p_variation(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p-variation needs p >= 1, got {p}")));
        }
        let x = self.vertices();
        let mut best = vec![0.0f64; x.len()];
        for j in 1..x.len() {
            let mut b = 0.0f64;
            for i in 0..j {
                let step = libm::pow(norm(&sub(&x[j], &x[i])), p);
                b = b.max(best[i] + step);
            }
            best[j] = b;
        }
        Ok(libm::pow(best[x.len() - 1], 1.0 / p))
    }

    /// True when every pair of consecutive segments is orthogonal (relative
    /// tolerance [`COLLINEAR_TOL`]) and no segment is zero.
    pub fn has_orthogonal_steps(&self) -> bool {
        first_non_orthogonal(&self.segments).is_none()
            && self.segments.iter().all(|v| norm(v) > 0.0)
    }

    pub(crate) fn check_orthogonal_steps(&self) -> Result<()> {
        match first_non_orthogonal(&self.segments) {
            Some(index) => Err(Error::NotOrthogonal { index }),
            None if self.segments.iter().any(|v| norm(v) == 0.0) => {
                Err(Error::InvalidParameter("zero segment in axis path".into()))
            }
            None => Ok(()),
        }
    }

    /// The axis paths `(ρ_n, σ_n)` in `R^2`: `ρ_1 = γ_{e1} ∗ γ_{e2}`,
    /// `σ_1 = γ_{e2} ∗ γ_{e1}`, `ρ_n = ρ_{n-1} ∗ σ_{n-1}`, `σ_n = σ_{n-1} ∗ ρ_{n-1}`.
    /// Both have length `2^n`; segments are returned unmerged.
    pub fn axis_rho_sigma(n: usize) -> Result<(Self, Self)> {
        if n < 1 {
            return Err(Error::InvalidParameter("axis paths start at n = 1".into()));
        }
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let mut rho = Self::new(2, vec![e1.clone(), e2.clone()])?;
        let mut sigma = Self::new(2, vec![e2, e1])?;
        for _ in 1..n {
            let next_rho = rho.concat(&sigma)?;
            let next_sigma = sigma.concat(&rho)?;
            rho = next_rho;
            sigma = next_sigma;
        }
        Ok((rho, sigma))
    }

    /// `Γ_k = σ_k ∗ ←ρ_k`, of length `2^{k+1}`, whose signature vanishes on
    /// levels `1..=k` but is not trivial.
    pub fn gamma_loop(k: usize) -> Result<Self> {
        let (rho, sigma) = Self::axis_rho_sigma(k)?;
        sigma.concat(&rho.reverse())
    }
}

fn collinear(u: &[f64], v: &[f64]) -> bool {
    let uu = dot(u, u);
    if uu == 0.0 {
        return true;
    }
    let lambda = dot(u, v) / uu;
    let rejection = sub(v, &scaled(u, lambda));
    norm(&rejection) <= COLLINEAR_TOL * norm(v)
}

fn first_non_orthogonal(segments: &[Vec<f64>]) -> Option<usize> {
    segments.windows(2).position(|w| {
        let scale = norm(&w[0]) * norm(&w[1]);
        dot(&w[0], &w[1]).abs() > COLLINEAR_TOL * scale
    })
}

fn evaluate_with(bp: &[f64], vertices: &[Vec<f64>], segments: &[Vec<f64>], t: f64) -> Vec<f64> {
    let m = segments.len();
    if m == 0 || bp[m] == 0.0 {
        return vertices[0].clone();
    }
    // exact hits return the stored vertex (last one wins for zero segments)
    if let Some(j) = bp.iter().rposition(|&b| b == t) {
        return vertices[j].clone();
    }
    // first breakpoint strictly greater than t
    let upper = bp.partition_point(|&b| b <= t).clamp(1, m);
    let i = upper - 1;
    let frac = (t - bp[i]) / (bp[upper] - bp[i]);
    add(&vertices[i], &scaled(&segments[i], frac))
}
