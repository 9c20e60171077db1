//! Linear functionals on truncated signatures, fitted by (ridge) least squares
//! to responses generated by an affine controlled ODE.
//!
//! Features are the flattened signature levels `0..=depth` in row-major,
//! level-ascending order. Because the flat layout of a deeper signature
//! starts with the flat layout of every shallower truncation, one feature
//! matrix serves all fitting depths up to the depth it was built at.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ito::{oracle_solve, LinearVectorField};
use crate::linalg::norm;
use crate::path::PiecewiseLinearPath;
use crate::signature::signature;
use crate::tensor::{coefficient_count, TruncatedTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    dim: usize,
    depth: usize,
    /// One flat coefficient vector per output coordinate.
    coefficients: Vec<Vec<f64>>,
}

impl LinearFunctional {
    pub fn new(dim: usize, depth: usize, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let count = coefficient_count(dim, depth).ok_or(Error::DepthTooLarge { dim, depth })?;
        if coefficients.is_empty() {
            return Err(Error::ShapeMismatch("functional needs at least one output".into()));
        }
        if let Some(bad) = coefficients.iter().find(|c| c.len() != count) {
            return Err(Error::ShapeMismatch(format!(
                "expected {count} coefficients per output for d={dim}, depth={depth}, got {}",
                bad.len()
            )));
        }
        Ok(LinearFunctional { dim, depth, coefficients })
    }

    pub fn zeros(dim: usize, depth: usize, outputs: usize) -> Result<Self> {
        let count = coefficient_count(dim, depth).ok_or(Error::DepthTooLarge { dim, depth })?;
        LinearFunctional::new(dim, depth, vec![vec![0.0; count]; outputs])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn outputs(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// `⟨L, x⟩` for a flat feature vector; longer vectors are truncated to
    /// this functional's depth.
    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        let count = self.coefficients[0].len();
        if features.len() < count {
            return Err(Error::ShapeMismatch(format!(
                "feature vector has {} entries, functional needs {count}",
                features.len()
            )));
        }
        Ok(self
            .coefficients
            .iter()
            .map(|c| c.iter().zip(features).fold(0.0, |acc, (a, x)| acc + a * x))
            .collect())
    }

    pub fn apply_tensor(&self, t: &TruncatedTensor) -> Result<Vec<f64>> {
        if t.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "tensor dimension {} does not match functional dimension {}",
                t.dim(),
                self.dim
            )));
        }
        if t.depth() < self.depth {
            return Err(Error::LevelOutOfRange {
                level: self.depth,
                depth: t.depth(),
            });
        }
        self.apply(&t.flatten())
    }
}

/// Flattened levels `0..=depth` of the signature.
pub fn featurize(path: &PiecewiseLinearPath, depth: usize) -> Result<Vec<f64>> {
    Ok(signature(path, depth)?.flatten())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_paths: usize,
    pub segment_count: usize,
    /// Length budget `r`: every path has total length at most `r`.
    pub radius: f64,
    pub noise_scale: f64,
    pub seed: u64,
    /// Depth at which features are stored; fits may use any depth up to it.
    pub feature_depth: usize,
    /// Fraction of paths used for fitting; the rest are held out.
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_paths: 200,
            segment_count: 4,
            radius: 1.0,
            noise_scale: 0.0,
            seed: 0,
            feature_depth: 4,
            train_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub dim: usize,
    pub feature_depth: usize,
    pub paths: Vec<PiecewiseLinearPath>,
    pub features: Vec<Vec<f64>>,
    /// Observed responses (targets plus noise).
    pub responses: Vec<Vec<f64>>,
    /// Noise-free ground truth.
    pub targets: Vec<Vec<f64>>,
    pub noise_scale: f64,
    /// The first `n_train` samples are the training set.
    pub n_train: usize,
}

impl RegressionDataset {
    /// Assembles a dataset from paths and responses, computing features.
    pub fn from_paths(
        paths: Vec<PiecewiseLinearPath>,
        responses: Vec<Vec<f64>>,
        feature_depth: usize,
        n_train: usize,
    ) -> Result<Self> {
        let first = paths.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        if responses.len() != paths.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} paths but {} responses",
                paths.len(),
                responses.len()
            )));
        }
        if paths.iter().any(|p| p.dim() != dim) {
            return Err(Error::ShapeMismatch("paths of mixed dimension".into()));
        }
        let w = responses[0].len();
        if w == 0 || responses.iter().any(|r| r.len() != w) {
            return Err(Error::ShapeMismatch("responses must share a positive length".into()));
        }
        if n_train == 0 || n_train > paths.len() {
            return Err(Error::InvalidParameter(format!(
                "training size {n_train} outside 1..={}",
                paths.len()
            )));
        }
        let features = paths
            .iter()
            .map(|p| featurize(p, feature_depth))
            .collect::<Result<Vec<_>>>()?;
        Ok(RegressionDataset {
            dim,
            feature_depth,
            paths,
            features,
            targets: responses.clone(),
            responses,
            noise_scale: 0.0,
            n_train,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.responses.first().map_or(0, Vec::len)
    }

    /// Copy with every response and target multiplied by `c`.
    pub fn scaled_responses(&self, c: f64) -> Self {
        let scale = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
        RegressionDataset {
            responses: scale(&self.responses),
            targets: scale(&self.targets),
            ..self.clone()
        }
    }
}

/// Random path with `segments` pieces of total length at most `radius`.
pub fn random_path(dim: usize, segments: usize, radius: f64, rng: &mut impl Rng) -> PiecewiseLinearPath {
    let total = radius * (1.0 - rng.random::<f64>());
    let weights: Vec<f64> = (0..segments).map(|_| 0.05 + rng.random::<f64>()).collect();
    let sum: f64 = weights.iter().sum();
    let segs = weights
        .iter()
        .map(|w| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm(&v);
            let len = total * w / sum;
            for c in v.iter_mut() {
                *c *= len / n;
            }
            v
        })
        .collect();
    PiecewiseLinearPath::new(dim, segs).expect("finite random segments")
}

/// Paths of length at most `r`, responses `oracle_solve(field, γ, y0)` plus
/// centred Gaussian noise. Deterministic in `config.seed`.
pub fn generate_dataset(
    field: &LinearVectorField,
    y0: &[f64],
    config: &DatasetConfig,
) -> Result<RegressionDataset> {
    if !(config.radius > 0.0) || config.n_paths == 0 || config.segment_count == 0 {
        return Err(Error::InvalidParameter("need r > 0, at least one path and one segment".into()));
    }
    if !(config.noise_scale >= 0.0) || !(config.train_fraction > 0.0 && config.train_fraction <= 1.0) {
        return Err(Error::InvalidParameter("noise must be >= 0 and train fraction in (0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = field.input_dim();
    let paths: Vec<PiecewiseLinearPath> = (0..config.n_paths)
        .map(|_| random_path(d, config.segment_count, config.radius, &mut rng))
        .collect();
    let targets = paths
        .iter()
        .map(|p| oracle_solve(field, p, y0))
        .collect::<Result<Vec<_>>>()?;
    let responses: Vec<Vec<f64>> = targets
        .iter()
        .map(|t| {
            t.iter()
                .map(|x| x + config.noise_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let n_train = (libm::round(config.n_paths as f64 * config.train_fraction) as usize).clamp(1, config.n_paths);
    let mut data = RegressionDataset::from_paths(paths, responses, config.feature_depth, n_train)?;
    data.targets = targets;
    data.noise_scale = config.noise_scale;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub functional: LinearFunctional,
    pub rank: usize,
    /// Set when `λ = 0` and the design matrix has dependent columns; the
    /// minimum-norm solution is returned.
    pub rank_deficient: bool,
}

/// Minimises `Σ_i |⟨L, x_i⟩ - Y_i|² + λ |L|²` over the training samples.
pub fn fit(data: &RegressionDataset, depth: usize, ridge: f64) -> Result<Fit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    if depth > data.feature_depth {
        return Err(Error::LevelOutOfRange {
            level: depth,
            depth: data.feature_depth,
        });
    }
    let p = coefficient_count(data.dim, depth).ok_or(Error::DepthTooLarge { dim: data.dim, depth })?;
    let n = data.n_train;
    let w = data.output_dim();
    let x = DMatrix::from_fn(n, p, |i, j| data.features[i][j]);
    let y = DMatrix::from_fn(n, w, |i, o| data.responses[i][o]);

    let svd = x.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0f64, f64::max);
    let cutoff = n.max(p) as f64 * f64::EPSILON * s_max;
    let mut rank = 0;
    let gains: Vec<f64> = s
        .iter()
        .map(|&si| {
            if si > cutoff {
                rank += 1;
            }
            if ridge > 0.0 {
                si / (si * si + ridge)
            } else if si > cutoff {
                1.0 / si
            } else {
                0.0
            }
        })
        .collect();
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    let mut uty = u.transpose() * y;
    for (r, g) in gains.iter().enumerate() {
        uty.row_mut(r).scale_mut(*g);
    }
    let beta = v_t.transpose() * uty;
    let coefficients = (0..w).map(|o| beta.column(o).iter().copied().collect()).collect();
    Ok(Fit {
        functional: LinearFunctional::new(data.dim, depth, coefficients)?,
        rank,
        rank_deficient: ridge == 0.0 && rank < p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub depth: usize,
    pub n_train: usize,
    pub n_heldout: usize,
    pub train_rmse: f64,
    /// `None` when every sample is used for training.
    pub heldout_rmse: Option<f64>,
    /// Largest |response − prediction| coordinate over all samples.
    pub max_abs_error: f64,
    /// `sup_i |Φ(γ_i) − ⟨L, S(γ_i)⟩|` against the noise-free targets.
    pub uniform_gap: f64,
}

fn rmse(errors: &[Vec<f64>]) -> f64 {
    let count = errors.iter().map(Vec::len).sum::<usize>();
    let sq: f64 = errors.iter().flatten().map(|e| e * e).sum();
    libm::sqrt(sq / count as f64)
}

pub fn evaluate(functional: &LinearFunctional, data: &RegressionDataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if functional.dim() != data.dim || functional.outputs() != data.output_dim() {
        return Err(Error::ShapeMismatch(format!(
            "functional (d={}, outputs={}) does not fit dataset (d={}, outputs={})",
            functional.dim(),
            functional.outputs(),
            data.dim,
            data.output_dim()
        )));
    }
    if functional.depth() > data.feature_depth {
        return Err(Error::LevelOutOfRange {
            level: functional.depth(),
            depth: data.feature_depth,
        });
    }
    let predictions = data
        .features
        .iter()
        .map(|x| functional.apply(x))
        .collect::<Result<Vec<_>>>()?;
    let diff = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .zip(&predictions)
            .map(|(r, p)| r.iter().zip(p).map(|(a, b)| a - b).collect())
            .collect()
    };
    let residuals = diff(&data.responses);
    let gaps = diff(&data.targets);
    let (train, held) = residuals.split_at(data.n_train);
    let abs_max = |rows: &[Vec<f64>]| rows.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok(Metrics {
        depth: functional.depth(),
        n_train: train.len(),
        n_heldout: held.len(),
        train_rmse: rmse(train),
        heldout_rmse: (!held.is_empty()).then(|| rmse(held)),
        max_abs_error: abs_max(&residuals),
        uniform_gap: abs_max(&gaps),
    })
}

/// Start point used by the demo pipeline.
pub const DEMO_Y0: [f64; 2] = [1.0, 0.0];

/// A fixed non-commuting affine field on `R^2 → R^2`, scaled so that its
/// certified remainder constant satisfies `C·r ≤ 1` along paths of length `r`
/// from [`DEMO_Y0`].
pub fn demo_field(radius: f64) -> Result<LinearVectorField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let base = LinearVectorField::new(
        vec![vec![vec![0.0, 1.0], vec![-1.0, 0.0]], vec![vec![0.5, 0.3], vec![0.0, -0.5]]],
        Some(vec![vec![0.2, 0.0], vec![0.0, 0.3]]),
    )?;
    let cr = |s: f64| base.scaled(s).certified_constant(&DEMO_Y0, radius) * radius;
    // C·r is increasing in the scale; bisect for C·r = 1
    let (mut lo, mut hi) = (0.0, 1.0);
    while cr(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cr(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(base.scaled(lo))
}
