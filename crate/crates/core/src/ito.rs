//! Signature series for controlled ODEs `dy = A(dγ) y + b(dγ)` driven by
//! piecewise-linear paths.
//!
//! Word `(i_1, …, i_k)` acts on the start point as
//! `A_{i_k} ⋯ A_{i_2} (A_{i_1} y0 + b_{i_1})`: the first letter is applied
//! innermost, which is the order in which Picard iteration produces it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{expm, factorial, norm, sub};
use crate::path::PiecewiseLinearPath;
use crate::regression::LinearFunctional;
use crate::signature::signature;
use crate::tensor::{coefficient_count, TruncatedTensor};
use crate::{Error, Result};

/// Default agreement tolerance between successive RK4 refinements.
pub const ORACLE_TOL: f64 = 1e-10;

/// Largest number of RK4 steps per segment before giving up.
pub const MAX_RK4_STEPS: usize = 1 << 18;

/// Affine vector field `V(v) y = Σ_j v^j (A_j y + b_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct LinearVectorField {
    d: usize,
    w: usize,
    // row-major w×w, one per input coordinate
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    d: usize,
    w: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    b: Option<Vec<Vec<f64>>>,
}

impl TryFrom<FieldRepr> for LinearVectorField {
    type Error = Error;

    fn try_from(r: FieldRepr) -> Result<Self> {
        let field = LinearVectorField::new(r.a, r.b)?;
        if field.d != r.d || field.w != r.w {
            return Err(Error::ShapeMismatch(format!(
                "declared d={}, w={} but matrices give d={}, w={}",
                r.d, r.w, field.d, field.w
            )));
        }
        Ok(field)
    }
}

impl From<LinearVectorField> for FieldRepr {
    fn from(f: LinearVectorField) -> Self {
        let a = f
            .a
            .iter()
            .map(|m| m.chunks(f.w).map(<[f64]>::to_vec).collect())
            .collect();
        FieldRepr {
            d: f.d,
            w: f.w,
            a,
            b: Some(f.b),
        }
    }
}

impl LinearVectorField {
    /// Builds a field from `d` square matrices (as rows) and optional offsets.
    pub fn new(a: Vec<Vec<Vec<f64>>>, b: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let d = a.len();
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        let w = a[0].len();
        if w == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut flat = Vec::with_capacity(d);
        for (j, m) in a.iter().enumerate() {
            if m.len() != w || m.iter().any(|row| row.len() != w) {
                return Err(Error::ShapeMismatch(format!("A_{} is not {w}x{w}", j + 1)));
            }
            flat.push(m.concat());
        }
        let b = match b {
            Some(b) => {
                if b.len() != d || b.iter().any(|v| v.len() != w) {
                    return Err(Error::ShapeMismatch(format!("b must hold {d} vectors of length {w}")));
                }
                b
            }
            None => vec![vec![0.0; w]; d],
        };
        if flat.iter().chain(&b).flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(LinearVectorField { d, w, a: flat, b })
    }

    pub fn zero(d: usize, w: usize) -> Result<Self> {
        if d == 0 || w == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(LinearVectorField {
            d,
            w,
            a: vec![vec![0.0; w * w]; d],
            b: vec![vec![0.0; w]; d],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn state_dim(&self) -> usize {
        self.w
    }

    /// `A_j` for `j` in `1..=d`, row-major.
    pub fn matrix(&self, j: usize) -> &[f64] {
        &self.a[j - 1]
    }

    pub fn offset(&self, j: usize) -> &[f64] {
        &self.b[j - 1]
    }

    /// True when every offset vanishes.
    pub fn is_linear(&self) -> bool {
        self.b.iter().flatten().all(|&x| x == 0.0)
    }

    /// Multiplies every matrix and offset by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let scale = |v: &Vec<f64>| v.iter().map(|x| s * x).collect();
        LinearVectorField {
            d: self.d,
            w: self.w,
            a: self.a.iter().map(scale).collect(),
            b: self.b.iter().map(scale).collect(),
        }
    }

    fn mat(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.w, self.w, &self.a[j])
    }

    /// `A(v) = Σ_j v^j A_j`.
    pub fn direction_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.w, self.w);
        for (j, &c) in v.iter().enumerate() {
            if c != 0.0 {
                m += self.mat(j) * c;
            }
        }
        m
    }

    /// `b(v) = Σ_j v^j b_j`.
    pub fn direction_offset(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.w);
        for (j, &c) in v.iter().enumerate() {
            out += DVector::from_column_slice(&self.b[j]) * c;
        }
        out
    }

    /// `√d · max_j ‖A_j‖_op`: bounds `‖A(v)‖_op` for unit `v`.
    pub fn matrix_bound(&self) -> f64 {
        let max_op = (0..self.d)
            .map(|j| self.mat(j).singular_values().max())
            .fold(0.0f64, f64::max);
        libm::sqrt(self.d as f64) * max_op
    }

    /// `√d · max_j |b_j|`: bounds `|b(v)|` for unit `v`.
    pub fn offset_bound(&self) -> f64 {
        let max_b = self.b.iter().map(|v| norm(v)).fold(0.0f64, f64::max);
        libm::sqrt(self.d as f64) * max_b
    }

    /// `√d (max_j ‖A_j‖_op + max_j |b_j|)`, the growth constant of the field on
    /// the unit ball of the state space.
    pub fn growth_constant(&self) -> f64 {
        self.matrix_bound() + self.offset_bound()
    }

    /// Remainder constant valid along any path of length `length` from `y0`.
    ///
    /// The solution stays inside `|y| ≤ R = (|y0| + β̂ L) e^{â L}` (Gronwall),
    /// so every iterated term is bounded with `C = max(â, â R + β̂)`. When
    /// `R ≤ 1` this is at most [`growth_constant`](Self::growth_constant);
    /// beyond the unit ball it grows with `R`.
    pub fn certified_constant(&self, y0: &[f64], length: f64) -> f64 {
        let a = self.matrix_bound();
        let beta = self.offset_bound();
        if beta == 0.0 && a == 0.0 {
            return 0.0;
        }
        let radius = (norm(y0) + beta * length) * libm::exp(a * length);
        f64::max(a, a * radius + beta)
    }

    fn check_state(&self, y0: &[f64]) -> Result<()> {
        if y0.len() != self.w {
            return Err(Error::ShapeMismatch(format!(
                "initial value has length {}, field state dimension is {}",
                y0.len(),
                self.w
            )));
        }
        if y0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.d {
            return Err(Error::ShapeMismatch(format!(
                "path dimension {dim} does not match field input dimension {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Images of `y0` under every word operator up to length `depth`;
    /// level `k` is laid out word-major then state coordinate.
    fn word_images(&self, y0: &[f64], depth: usize) -> Vec<Vec<f64>> {
        let (d, w) = (self.d, self.w);
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(depth);
        for k in 1..=depth {
            let count = d.pow(k as u32);
            let mut level = vec![0.0; count * w];
            for idx in 0..count {
                let letter = idx % d;
                let a = &self.a[letter];
                let dst = &mut level[idx * w..(idx + 1) * w];
                let src: &[f64] = if k == 1 { y0 } else { &out[k - 2][(idx / d) * w..(idx / d + 1) * w] };
                for (r, slot) in dst.iter_mut().enumerate() {
                    let row = &a[r * w..(r + 1) * w];
                    *slot = row.iter().zip(src).map(|(x, y)| x * y).sum();
                }
                if k == 1 {
                    for (slot, bb) in dst.iter_mut().zip(&self.b[letter]) {
                        *slot += bb;
                    }
                }
            }
            out.push(level);
        }
        out
    }
}

/// `Σ_{|w| = k} t[w] · A_{w_k} ⋯ A_{w_2}(A_{w_1} y0 + b_{w_1})`.
pub fn apply_word_operator(
    f: &LinearVectorField,
    tensor: &TruncatedTensor,
    k: usize,
    y0: &[f64],
) -> Result<Vec<f64>> {
    f.check_state(y0)?;
    f.check_input(tensor.dim())?;
    let level = tensor.level(k)?;
    if k == 0 {
        return Ok(y0.iter().map(|y| level[0] * y).collect());
    }
    let images = f.word_images(y0, k);
    let w = f.w;
    let mut out = vec![0.0; w];
    for (idx, &c) in level.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (o, slot) in out.iter_mut().enumerate() {
            *slot += c * images[k - 1][idx * w + o];
        }
    }
    Ok(out)
}

/// `L_N(a) = y0 a_0 + Σ_{k=1}^N f^{(k)}_{a_k} I(y0)` as an explicit functional.
#[allow(non_snake_case)]
pub fn truncated_functional_LN(f: &LinearVectorField, y0: &[f64], n: usize) -> Result<LinearFunctional> {
    f.check_state(y0)?;
    coefficient_count(f.d, n).ok_or(Error::DepthTooLarge { dim: f.d, depth: n })?;
    let images = f.word_images(y0, n);
    let w = f.w;
    let coefficients = (0..w)
        .map(|o| {
            let mut c = vec![y0[o]];
            for level in &images {
                c.extend(level.iter().skip(o).step_by(w));
            }
            c
        })
        .collect();
    LinearFunctional::new(f.d, n, coefficients)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSolution {
    pub value: Vec<f64>,
    pub terms_used: usize,
    pub error_bound: f64,
    /// Constant `C` entering the remainder bound.
    pub growth_constant: f64,
    /// Reduced length `L` of the driving path.
    pub length: f64,
    pub oracle_value: Option<Vec<f64>>,
    pub discrepancy: Option<f64>,
}

impl SeriesSolution {
    /// Attaches an independent solution and the Euclidean discrepancy to it.
    pub fn with_oracle(mut self, oracle: Vec<f64>) -> Self {
        self.discrepancy = Some(norm(&sub(&self.value, &oracle)));
        self.oracle_value = Some(oracle);
        self
    }
}

/// `C^{N+1} L^{N+1} / (N+1)!`.
pub fn remainder_bound(c: f64, length: f64, n: usize) -> f64 {
    libm::pow(c * length, (n + 1) as f64) / factorial(n + 1)
}

/// Partial sum of the signature series through level `n`.
///
/// Computed on the tree-reduced path, so the value depends only on the
/// equivalence class of `path`.
pub fn ito_series(
    f: &LinearVectorField,
    path: &PiecewiseLinearPath,
    y0: &[f64],
    n: usize,
) -> Result<SeriesSolution> {
    f.check_input(path.dim())?;
    let reduced = path.reduce();
    let functional = truncated_functional_LN(f, y0, n)?;
    let sig = signature(&reduced, n)?;
    let value = functional.apply_tensor(&sig)?;
    let length = reduced.length();
    let c = f.certified_constant(y0, length);
    Ok(SeriesSolution {
        value,
        terms_used: n,
        error_bound: remainder_bound(c, length, n),
        growth_constant: c,
        length,
        oracle_value: None,
        discrepancy: None,
    })
}

/// Independent solution of the ODE along `path`.
///
/// Linear fields use the exact segment flows `exp(A(v_m)) ⋯ exp(A(v_1)) y0`.
/// Affine fields use classical RK4 with the step halved until two successive
/// refinements agree to `ORACLE_TOL · max(1, |y|)`.
pub fn oracle_solve(f: &LinearVectorField, path: &PiecewiseLinearPath, y0: &[f64]) -> Result<Vec<f64>> {
    oracle_solve_with_tol(f, path, y0, ORACLE_TOL)
}

pub fn oracle_solve_with_tol(
    f: &LinearVectorField,
    path: &PiecewiseLinearPath,
    y0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    f.check_state(y0)?;
    f.check_input(path.dim())?;
    let segments: Vec<&Vec<f64>> = path.segments().iter().filter(|v| v.iter().any(|&c| c != 0.0)).collect();
    let mut y = DVector::from_column_slice(y0);
    if f.is_linear() {
        for v in segments {
            y = expm(&f.direction_matrix(v)) * y;
        }
        return finite(y);
    }

    let systems: Vec<(DMatrix<f64>, DVector<f64>)> = segments
        .iter()
        .map(|v| (f.direction_matrix(v), f.direction_offset(v)))
        .collect();
    let integrate = |steps: usize| -> DVector<f64> {
        let h = 1.0 / steps as f64;
        let mut y = y.clone();
        for (m, b) in &systems {
            let rhs = |z: &DVector<f64>| m * z + b;
            for _ in 0..steps {
                let k1 = rhs(&y);
                let k2 = rhs(&(&y + &k1 * (h / 2.0)));
                let k3 = rhs(&(&y + &k2 * (h / 2.0)));
                let k4 = rhs(&(&y + &k3 * h));
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        y
    };
    let mut steps = 8;
    let mut coarse = integrate(steps);
    while steps < MAX_RK4_STEPS {
        steps *= 2;
        let fine = integrate(steps);
        let gap = (&fine - &coarse).norm();
        if !gap.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite state after {steps} steps")));
        }
        if gap <= tol * fine.norm().max(1.0) {
            return finite(fine);
        }
        coarse = fine;
    }
    Err(Error::NonConvergence(format!(
        "RK4 refinements still differ by more than {tol} at {MAX_RK4_STEPS} steps per segment"
    )))
}

fn finite(y: DVector<f64>) -> Result<Vec<f64>> {
    if y.iter().all(|x| x.is_finite()) {
        Ok(y.iter().copied().collect())
    } else {
        Err(Error::NonConvergence("non-finite state".into()))
    }
}

/// Series solution with the oracle value and discrepancy attached.
pub fn solve(
    f: &LinearVectorField,
    path: &PiecewiseLinearPath,
    y0: &[f64],
    n: usize,
) -> Result<SeriesSolution> {
    let series = ito_series(f, path, y0, n)?;
    Ok(series.with_oracle(oracle_solve(f, path, y0)?))
}
