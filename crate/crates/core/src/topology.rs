//! Computable stand-ins for the three topologies on unparameterised path space
//! and the witness sequences that separate them.
//!
//! * The product topology is metrised by [`TruncatedTensor::product_metric`]
//!   applied to truncated signatures.
//! * The quotient topology has no computable metric; it only appears through
//!   1-variation distances between explicit representatives.
//! * The metric `d` compares reduced, constant-speed representatives in
//!   1-variation ([`metric_d`]).
//!
//! Every experiment returns an [`ExperimentReport`] whose verdict is a pure
//! function of its stored series ([`ExperimentReport::recheck`]).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, factorial, norm};
use crate::path::PiecewiseLinearPath;
use crate::signature::signature;
use crate::tensor::TruncatedTensor;
use crate::{Error, Result};

/// Absolute slack for comparisons of quantities computed in floating point.
pub const REPORT_TOL: f64 = 1e-12;

/// Largest `k` accepted by [`experiment_product_vs_metric`].
pub const MAX_GAMMA_INDEX: usize = 6;

/// Largest segment count for exact sign-vector enumeration.
pub const MAX_ENUMERATED_SEGMENTS: usize = 20;

/// Default Monte Carlo sample count in [`length_lower_bound`].
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Experiment names understood by [`ExperimentReport::recheck`].
pub const EXPERIMENT_NAMES: [&str; 5] = [
    "product-vs-metric",
    "quotient-vs-metric",
    "incompleteness",
    "group-discontinuity",
    "length-bound",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub indices: Vec<u64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub verdict: bool,
    pub seed: u64,
}

impl ExperimentReport {
    fn new(name: &str, indices: Vec<u64>, seed: u64) -> Self {
        ExperimentReport {
            name: name.to_string(),
            indices,
            series: BTreeMap::new(),
            verdict: false,
            seed,
        }
    }

    fn push(&mut self, label: &str, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.indices.len(), "series {label} misaligned");
        self.series.insert(label.to_string(), values);
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.series.get(label).map(Vec::as_slice)
    }

    fn finish(mut self) -> Result<Self> {
        self.verdict = self.recheck()?;
        Ok(self)
    }

    /// Recomputes the verdict from the stored series alone.
    pub fn recheck(&self) -> Result<bool> {
        let s = |label: &str| -> Result<&[f64]> {
            self.get(label)
                .ok_or_else(|| Error::InvalidParameter(format!("report lacks series {label}")))
        };
        let ok = match self.name.as_str() {
            "product-vs-metric" => {
                let pm = s("product_metric")?;
                let d = s("metric_d")?;
                let expected = s("expected_metric_d")?;
                let low = s("max_low_level")?;
                d.iter().zip(expected).all(|(a, b)| a == b)
                    && low.iter().all(|&x| x <= REPORT_TOL)
                    && strictly_increasing(d)
                    && nonincreasing(pm)
                    && pm.first() > pm.last()
            }
            "quotient-vs-metric" => {
                let eps = s("epsilon")?;
                let ovd = s("one_variation_distance")?;
                let d = s("metric_d")?;
                let expected = s("expected_metric_d")?;
                (0..eps.len()).all(|i| {
                    ovd[i] <= 6.0 * eps[i] + REPORT_TOL
                        && (d[i] - expected[i]).abs() <= REPORT_TOL
                        && (eps[i] == 0.0 || d[i] >= 2.0)
                })
            }
            "incompleteness" => {
                let to_o = s("metric_d_to_o")?;
                let tail = s("cauchy_tail")?;
                let c = s("fitted_c")?;
                let pm = s("product_metric")?;
                let levels_ok = (1..=4).try_fold(true, |acc, k| {
                    Ok::<_, Error>(acc && nonincreasing(s(&format!("level_norm_{k}"))?))
                })?;
                to_o.iter().all(|&x| x >= 2.0)
                    && c.iter().all(|x| x.is_finite())
                    && self
                        .indices
                        .iter()
                        .zip(tail)
                        .zip(c)
                        .all(|((&n, &t), &c)| t <= c / n as f64 + REPORT_TOL)
                    && nonincreasing(tail)
                    && nonincreasing(pm)
                    && pm.first() > pm.last()
                    && levels_ok
            }
            "group-discontinuity" => {
                let rho = s("rho_to_v1")?;
                let sigma = s("sigma_to_minus_v1")?;
                let bound = s("three_over_n")?;
                let prod = s("product_to_o")?;
                let limit = s("limit_product_to_o")?;
                (0..rho.len()).all(|i| {
                    rho[i] <= bound[i] && sigma[i] <= bound[i] && prod[i] >= 2.0 && limit[i] == 0.0
                })
            }
            "length-bound" => {
                let phi = s("phi_scaled")?;
                let rhs = s("rhs")?;
                let growth = s("growth")?;
                let length = s("length")?;
                let mean = s("mc_mean")?;
                let se = s("mc_stderr")?;
                growth.windows(2).all(|w| w[1] >= w[0] * (1.0 - REPORT_TOL))
                    && (0..phi.len()).all(|i| {
                    let scale = phi[i].abs().max(1.0);
                    (rhs[i] <= 0.0 || phi[i] >= rhs[i] - REPORT_TOL * scale)
                        && growth[i] <= length[i] * (1.0 + REPORT_TOL)
                        && (mean[i] - phi[i]).abs() <= 3.0 * se[i] + 1e-9 * scale
                })
            }
            other => {
                return Err(Error::InvalidParameter(format!("unknown experiment {other}")));
            }
        };
        Ok(ok)
    }
}

fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + REPORT_TOL)
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// `d([a],[b]) = ‖a* - b*‖_1` on reduced constant-speed representatives.
pub fn metric_d(a: &PiecewiseLinearPath, b: &PiecewiseLinearPath) -> Result<f64> {
    a.reduce()
        .constant_speed()
        .one_variation_distance(&b.reduce().constant_speed())
}

/// True iff the reduced length of `path` is at most `r`.
pub fn ball_br_membership(path: &PiecewiseLinearPath, r: f64) -> Result<bool> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {r}")));
    }
    Ok(path.reduce().length() <= r)
}

fn axis(seg: &[(f64, f64)]) -> PiecewiseLinearPath {
    PiecewiseLinearPath::new(2, seg.iter().map(|&(x, y)| vec![x, y]).collect())
        .expect("finite planar segments")
}

/// `γ_{εv₂} ∗ γ_{v₁} ∗ γ_{-εv₂} ∗ γ_{-v₁}` in `R^2`.
pub fn epsilon_loop(eps: f64) -> PiecewiseLinearPath {
    axis(&[(0.0, eps), (1.0, 0.0), (0.0, -eps), (-1.0, 0.0)])
}

/// The `Γ_k` family: for `k = 1..=k_max`, the product metric from `S(Γ_k)` to
/// `1` shrinks while `d([o],[Γ_k]) = 2^{k+1}` grows.
pub fn experiment_product_vs_metric(k_max: usize, depth: usize) -> Result<ExperimentReport> {
    if !(1..=MAX_GAMMA_INDEX).contains(&k_max) {
        return Err(Error::InvalidParameter(format!(
            "k_max must lie in 1..={MAX_GAMMA_INDEX}, got {k_max}"
        )));
    }
    let o = PiecewiseLinearPath::constant(2);
    let one = TruncatedTensor::identity(2, depth)?;
    let mut report = ExperimentReport::new("product-vs-metric", (1..=k_max as u64).collect(), 0);
    let (mut pm, mut d, mut expected, mut low, mut length) = (vec![], vec![], vec![], vec![], vec![]);
    for k in 1..=k_max {
        let gamma = PiecewiseLinearPath::gamma_loop(k)?;
        let sig = signature(&gamma, depth)?;
        pm.push(sig.product_metric(&one)?);
        d.push(metric_d(&o, &gamma)?);
        expected.push((1u64 << (k + 1)) as f64);
        let mut worst = 0.0f64;
        for m in 1..=k.min(depth) {
            worst = sig.level(m)?.iter().fold(worst, |w, c| w.max(c.abs()));
        }
        low.push(worst);
        length.push(gamma.reduce().length());
    }
    report.push("product_metric", pm);
    report.push("metric_d", d);
    report.push("expected_metric_d", expected);
    report.push("max_low_level", low);
    report.push("reduced_length", length);
    report.push("depth", vec![depth as f64; k_max]);
    report.finish()
}

/// The `γ_ε` family: 1-variation distance to `γ_0` is at most `6ε`, while the
/// reduced-representative metric stays at `2 + 2ε ≥ 2`.
pub fn experiment_quotient_vs_metric(eps_list: &[f64]) -> Result<ExperimentReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("epsilons must be finite and non-negative".into()));
    }
    let gamma0 = epsilon_loop(0.0);
    let mut report =
        ExperimentReport::new("quotient-vs-metric", (0..eps_list.len() as u64).collect(), 0);
    let (mut ovd, mut six, mut d, mut expected) = (vec![], vec![], vec![], vec![]);
    for &eps in eps_list {
        let g = epsilon_loop(eps);
        ovd.push(g.one_variation_distance(&gamma0)?);
        six.push(6.0 * eps);
        d.push(metric_d(&gamma0, &g)?);
        expected.push(if eps == 0.0 { 0.0 } else { 2.0 + 2.0 * eps });
    }
    report.push("epsilon", eps_list.to_vec());
    report.push("one_variation_distance", ovd);
    report.push("six_epsilon", six);
    report.push("metric_d", d);
    report.push("expected_metric_d", expected);
    report.finish()
}

/// The `ρ_n = γ_{v₂/n} ∗ γ_{v₁} ∗ γ_{-v₂/n} ∗ γ_{-v₁}` family: `d`-Cauchy, its
/// signatures tend to `1`, yet `d([o],[ρ_n]) ≥ 2`.
///
/// The Cauchy constant is fitted as `c = max n·d([ρ_n],[ρ_m])` over
/// `n < m ≤ 2 n_max`, and also reported per index as `n·d([ρ_n],[ρ_{2n}])`.
pub fn experiment_incompleteness(n_max: usize) -> Result<ExperimentReport> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 2, got {n_max}")));
    }
    const DEPTH: usize = 4;
    let rho = |n: usize| epsilon_loop(1.0 / n as f64);
    let o = PiecewiseLinearPath::constant(2);
    let one = TruncatedTensor::identity(2, DEPTH)?;
    let mut report = ExperimentReport::new("incompleteness", (1..=n_max as u64).collect(), 0);
    let (mut to_o, mut tail, mut doubling, mut pm) = (vec![], vec![], vec![], vec![]);
    let mut level_norms: Vec<Vec<f64>> = vec![Vec::new(); DEPTH];
    for n in 1..=n_max {
        let rn = rho(n);
        to_o.push(metric_d(&o, &rn)?);
        let mut sup = 0.0f64;
        for m in n + 1..=2 * n_max {
            sup = sup.max(metric_d(&rn, &rho(m))?);
        }
        tail.push(sup);
        doubling.push(n as f64 * metric_d(&rn, &rho(2 * n))?);
        let sig = signature(&rn, DEPTH)?;
        pm.push(sig.product_metric(&one)?);
        for (k, series) in level_norms.iter_mut().enumerate() {
            series.push(sig.level_norm(k + 1)?);
        }
    }
    let c = tail
        .iter()
        .enumerate()
        .map(|(i, t)| (i + 1) as f64 * t)
        .chain(doubling.iter().copied())
        .fold(0.0f64, f64::max);
    report.push("metric_d_to_o", to_o);
    report.push("cauchy_tail", tail);
    report.push("scaled_doubling", doubling);
    report.push("fitted_c", vec![c; n_max]);
    report.push("product_metric", pm);
    for (k, series) in level_norms.into_iter().enumerate() {
        report.push(&format!("level_norm_{}", k + 1), series);
    }
    report.finish()
}

/// `ρ_n = γ_{v₂/n} ∗ γ_{v₁} → γ_{v₁}` and `σ_n = γ_{-v₂/n} ∗ γ_{-v₁} → γ_{-v₁}`
/// in `d`, but `d([ρ_n]·[σ_n], [o]) ≥ 2` while `[γ_{v₁}]·[γ_{-v₁}] = [o]`.
pub fn experiment_group_discontinuity(n_max: usize) -> Result<ExperimentReport> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let o = PiecewiseLinearPath::constant(2);
    let v1 = axis(&[(1.0, 0.0)]);
    let minus_v1 = axis(&[(-1.0, 0.0)]);
    let limit = metric_d(&v1.concat(&minus_v1)?, &o)?;
    let mut report = ExperimentReport::new("group-discontinuity", (1..=n_max as u64).collect(), 0);
    let (mut rho_d, mut sigma_d, mut bound, mut prod) = (vec![], vec![], vec![], vec![]);
    for n in 1..=n_max {
        let h = 1.0 / n as f64;
        let rho = axis(&[(0.0, h), (1.0, 0.0)]);
        let sigma = axis(&[(0.0, -h), (-1.0, 0.0)]);
        rho_d.push(metric_d(&rho, &v1)?);
        sigma_d.push(metric_d(&sigma, &minus_v1)?);
        bound.push(3.0 / n as f64);
        prod.push(metric_d(&rho.concat(&sigma)?, &o)?);
    }
    report.push("rho_to_v1", rho_d);
    report.push("sigma_to_minus_v1", sigma_d);
    report.push("three_over_n", bound);
    report.push("product_to_o", prod);
    report.push("limit_product_to_o", vec![limit; n_max]);
    report.finish()
}

/// `E[(Σ_i E_i w_i)^{2n}]` for i.i.d. Rademacher signs, by enumeration.
pub fn rademacher_moment(weights: &[f64], n: usize) -> Result<f64> {
    let m = weights.len();
    if m > MAX_ENUMERATED_SEGMENTS {
        return Err(Error::InvalidParameter(format!(
            "sign enumeration limited to {MAX_ENUMERATED_SEGMENTS} segments, got {m}"
        )));
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << m) {
        let s: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| if mask & (1 << i) != 0 { -w } else { *w })
            .sum();
        total += libm::pow(s, (2 * n) as f64);
    }
    Ok(total / (1u64 << m) as f64)
}

/// Monte Carlo estimate of `E[X_n]`, `X_n = Π_j ⟨γ'_{U_(2j-1)}, γ'_{U_(2j)}⟩`
/// over the order statistics of `2n` uniforms. Returns `(mean, standard error)`.
pub fn order_statistics_estimate(
    path: &PiecewiseLinearPath,
    n: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let bp = path.breakpoints();
    let total = path.length();
    // constant-speed velocities L v̂_i
    let velocities: Vec<Vec<f64>> = path
        .segments()
        .iter()
        .map(|v| {
            let len = norm(v);
            v.iter().map(|c| if len > 0.0 { total * c / len } else { 0.0 }).collect()
        })
        .collect();
    let m = velocities.len();
    let segment_of = |u: f64| bp.partition_point(|&b| b <= u).clamp(1, m) - 1;

    let mut u = vec![0.0f64; 2 * n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        for x in u.iter_mut() {
            *x = rng.random::<f64>();
        }
        u.sort_by(f64::total_cmp);
        let x: f64 = u
            .chunks_exact(2)
            .map(|pair| dot(&velocities[segment_of(pair[0])], &velocities[segment_of(pair[1])]))
            .product();
        sum += x;
        sum_sq += x * x;
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq / count - mean * mean) * count / (count - 1.0)).max(0.0);
    (mean, libm::sqrt(var / count))
}

/// Length lower bound for an axis path with orthogonal consecutive segments.
///
/// For `n = 1..=n_max` reports `(2n)!·φ(S_{2n}(γ))`, the exact Rademacher
/// moment `P(A)`, the bound `m(1-r)^{2n}` on `P(B)`, the lower bound
/// `L^{2n}(P(A) - m(1-r)^{2n})`, the growth estimate `((2n)!·φ)^{1/(2n)}` and
/// a Monte Carlo estimate of `E[X_n]` from `samples` draws. The verdict also
/// requires the growth estimate to be nondecreasing over the tested range.
pub fn length_lower_bound(
    path: &PiecewiseLinearPath,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    path.check_orthogonal_steps()?;
    let m = path.segment_count();
    if m == 0 {
        return Err(Error::InvalidParameter("length bound needs a non-constant path".into()));
    }
    if n_max < 1 || samples < 2 {
        return Err(Error::InvalidParameter("need n_max >= 1 and at least 2 samples".into()));
    }
    let depth = 2 * n_max;
    let sig = signature(path, depth)?;
    let total = path.length();
    let weights: Vec<f64> = path.segments().iter().map(|v| norm(v) / total).collect();
    let r = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut report = ExperimentReport::new("length-bound", (1..=n_max as u64).collect(), seed);
    let (mut phi, mut prob_a, mut bound_b, mut rhs, mut growth) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut mean, mut stderr) = (vec![], vec![]);
    for n in 1..=n_max {
        let power = libm::pow(total, (2 * n) as f64);
        let scaled_phi = factorial(2 * n) * sig.phi_contraction(n)?;
        let pa = rademacher_moment(&weights, n)?;
        let pb = m as f64 * libm::pow(1.0 - r, (2 * n) as f64);
        phi.push(scaled_phi);
        prob_a.push(pa);
        bound_b.push(pb);
        rhs.push(power * (pa - pb));
        growth.push(libm::pow(scaled_phi.max(0.0), 1.0 / (2 * n) as f64));
        let (mu, se) = order_statistics_estimate(path, n, samples, &mut rng);
        mean.push(mu);
        stderr.push(se);
    }
    report.push("phi_scaled", phi);
    report.push("prob_a", prob_a);
    report.push("bound_b", bound_b);
    report.push("rhs", rhs);
    report.push("growth", growth);
    report.push("length", vec![total; n_max]);
    report.push("mc_mean", mean);
    report.push("mc_stderr", stderr);
    report.finish()
}
