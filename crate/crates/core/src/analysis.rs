//! Estimators and reference laws for the long-time behaviour of the process.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::closed_forms::{ModelParams, Regime};
use crate::error::{Error, Result};
use crate::path::{run_to_first_event, PathState, SimConfig, Stepper};
use crate::skeleton::RngStream;
use crate::tree::TreeVertex;
use crate::treebolic::{HTParams, HTPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub min: f64,
    pub max: f64,
}

impl SampleSummary {
    pub fn new(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let variance = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        SampleSummary {
            n,
            mean,
            variance,
            se: (variance / nf).sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Sample skewness `m3 / m2^{3/2}`.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Skewness with a batch-means standard error, which stays honest for
/// heavy-tailed samples where the normal-theory `√(6/n)` does not.
pub fn skewness_with_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let per: Vec<f64> = xs.chunks_exact(size).take(batches).map(skewness).collect();
    let s = SampleSummary::new(&per);
    (skewness(xs), s.se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n1: usize,
    pub n2: Option<usize>,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup |F̂ - F|` against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, n1: v.len(), n2: None }
}

/// `sup |F̂₁ - F̂₂|` over the pooled sample.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult { statistic: d, n1: a.len(), n2: Some(b.len()) }
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeReport {
    pub target: f64,
    /// `d_HT(X_T, ô) / T`.
    pub rate: SampleSummary,
    /// `ln q · d_T(W_T, o) / T`.
    pub tree_rate: SampleSummary,
}

/// Rates of escape from the final states of paths started at `ô`.
pub fn estimate_escape_rate(states: &[PathState], params: &ModelParams, t: f64) -> EscapeReport {
    let ht = HTParams::new(params.q, params.p).expect("validated parameters");
    let o = ht.origin();
    let (rate, tree): (Vec<f64>, Vec<f64>) = states
        .par_iter()
        .map(|s| {
            let z = s.point();
            (ht.distance(&z, &o) / t, params.ln_q() * z.w.distance(&o.w) / t)
        })
        .unzip();
    EscapeReport {
        target: params.escape_rate().abs(),
        rate: SampleSummary::new(&rate),
        tree_rate: SampleSummary::new(&tree),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltReport {
    pub ks: KsResult,
    /// Summary of the standardized statistic.
    pub standardized: SampleSummary,
}

fn normal_report(standardized: Vec<f64>) -> CltReport {
    CltReport {
        ks: ks_one_sample(&standardized, standard_normal_cdf),
        standardized: SampleSummary::new(&standardized),
    }
}

/// `(Y_t - tℓ/ln q) / (σ √t)` against `N(0, 1)`.
pub fn vertical_clt(states: &[PathState], params: &ModelParams, t: f64) -> CltReport {
    let drift = params.closed_forms().ell / params.ln_q();
    let scale = (params.clt_sigma2() * t).sqrt();
    normal_report(states.iter().map(|s| (s.y - t * drift) / scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceCltReport {
    /// Against `N(0, ln²q · σ²)`, the law of `ln q · (Y_t - tℓ/ln q)/√t`.
    pub distance_units: CltReport,
    /// Against `N(0, σ²)` with `σ²` taken literally.
    pub literal: CltReport,
}

/// `(d_HT(X_t, ô) - t|ℓ|) / √t` for `ℓ ≠ 0`.
pub fn distance_clt(distances: &[f64], params: &ModelParams, t: f64) -> Result<DistanceCltReport> {
    if params.regime() == Regime::Critical {
        return Err(Error::InvalidParameter(
            "distance CLT needs a nonzero escape rate; use the drift-free limit".into(),
        ));
    }
    let ell = params.escape_rate().abs();
    let centred: Vec<f64> = distances.iter().map(|d| (d - t * ell) / t.sqrt()).collect();
    let s2 = params.clt_sigma2();
    let scaled = |v: f64| centred.iter().map(|c| c / v.sqrt()).collect::<Vec<_>>();
    Ok(DistanceCltReport {
        distance_units: normal_report(scaled(s2 * params.ln_q().powi(2))),
        literal: normal_report(scaled(s2)),
    })
}

/// Maximum, minimum and endpoint of a standard Brownian path on `[0, 1]`
/// sampled on `grid_n` steps.
pub fn brownian_extremes<R: Rng + ?Sized>(rng: &mut R, grid_n: usize) -> (f64, f64, f64) {
    let h = (1.0 / grid_n as f64).sqrt();
    let (mut b, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..grid_n {
        let z: f64 = StandardNormal.sample(rng);
        b += h * z;
        hi = hi.max(b);
        lo = lo.min(b);
    }
    (hi, lo, b)
}

/// One draw of `(ln q / √E τ)(2M̄ - 2M̲ - |N|)`.
pub fn drift_free_limit_sampler<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R, grid_n: usize) -> Result<f64> {
    if grid_n < 1000 {
        return Err(Error::InvalidParameter(format!("grid needs at least 1000 steps, got {grid_n}")));
    }
    let (hi, lo, end) = brownian_extremes(rng, grid_n);
    Ok(params.ln_q() / params.exp_tau().sqrt() * (2.0 * hi - 2.0 * lo - end.abs()))
}

/// `n` limit draws on streams `0..n` of `seed`.
pub fn drift_free_limit_samples(params: &ModelParams, seed: u64, n: u64, grid_n: usize) -> Result<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| drift_free_limit_sampler(params, &mut RngStream::new(seed, i).rng(), grid_n))
        .collect()
}

/// `d_HT(X_t, ô)/√t` against draws of the drift-free limit.
pub fn drift_free_clt(distances: &[f64], params: &ModelParams, t: f64, limit: &[f64]) -> Result<KsResult> {
    if params.regime() != Regime::Critical {
        return Err(Error::InvalidParameter("drift-free limit needs ρ = 1".into()));
    }
    let scaled: Vec<f64> = distances.iter().map(|d| d / t.sqrt()).collect();
    Ok(ks_two_sample(&scaled, limit))
}

/// Position at the first line visit after leaving the start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitSample {
    pub level: i64,
    #[serde(serialize_with = "crate::tree::serialize_vertex")]
    pub line: TreeVertex,
    pub x: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineHistogram {
    #[serde(serialize_with = "crate::tree::serialize_vertex")]
    pub line: TreeVertex,
    pub count: usize,
    pub mass: f64,
    /// Counts of `x - x₀` in equal bins over `[-window, window]`.
    pub bins: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitMeasure {
    pub samples: Vec<ExitSample>,
    pub lines: Vec<LineHistogram>,
    pub window: f64,
}

/// Exit samples from `start` until `τ(1)`, sample `i` on stream `i`.
pub fn exit_samples(
    params: &ModelParams,
    start: &HTPoint,
    n_samples: u64,
    seed: u64,
    dt: f64,
) -> Result<Vec<ExitSample>> {
    let cfg = SimConfig::new(dt, dt, seed)?;
    let stepper = Stepper::new(params, &cfg)?;
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            let (ev, _) = run_to_first_event(&stepper, start, &mut rng)?;
            Ok(ExitSample { level: ev.level, line: ev.vertex, x: ev.x, time: ev.time })
        })
        .collect()
}

/// Group exit samples by line and bin the abscissae.
pub fn exit_measure_histogram(samples: Vec<ExitSample>, x0: f64, window: f64, n_bins: usize) -> ExitMeasure {
    let mut lines: Vec<LineHistogram> = Vec::new();
    let total = samples.len() as f64;
    for s in &samples {
        let idx = match lines.iter().position(|l| l.line == s.line) {
            Some(i) => i,
            None => {
                lines.push(LineHistogram { line: s.line.clone(), count: 0, mass: 0.0, bins: vec![0; n_bins] });
                lines.len() - 1
            }
        };
        let h = &mut lines[idx];
        h.count += 1;
        let u = (s.x - x0 + window) / (2.0 * window);
        if (0.0..1.0).contains(&u) {
            h.bins[(u * n_bins as f64) as usize] += 1;
        }
    }
    for l in &mut lines {
        l.mass = l.count as f64 / total;
    }
    lines.sort_by_key(|a| (a.line.level(), a.line.to_string()));
    ExitMeasure { samples, lines, window }
}

/// Probabilities that the tree walk of the skeleton, started at a vertex,
/// ends in the cone of a vertex `e` levels above it on the same ray, for
/// `e = 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeOracle {
    pub depth: usize,
    pub level1: f64,
    pub level2: f64,
}

/// Absorption probabilities of the lumped tree walk on a depth-`depth`
/// truncation. A state `(e, i)` is a vertex whose confluent with the target
/// `v` lies `e` levels below `v` and `i` levels below the vertex itself.
/// Climbing `depth` levels above the confluent is absorbing (success iff
/// `e = 0`), and `e = depth` reflects downward steps.
pub fn cone_oracle(params: &ModelParams, depth: usize) -> Result<ConeOracle> {
    if depth < 3 {
        return Err(Error::InvalidParameter("cone oracle needs depth >= 3".into()));
    }
    let pr = params.skeleton_probs();
    let (down, up_each, p) = (pr.down_z, pr.up_each_child, params.p as f64);
    let d = depth;
    let idx = |e: usize, i: usize| e * d + i;
    let n = (d + 1) * d;
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    // h(e, i) - Σ P h(next) = Σ P · absorbed success
    for e in 0..=d {
        for i in 0..d {
            let row = idx(e, i);
            let go = |e2: usize, i2: usize, prob: f64, a: &mut DMatrix<f64>, rhs: &mut DVector<f64>| {
                if i2 >= d {
                    if e2 == 0 {
                        rhs[row] += prob;
                    }
                } else {
                    a[(row, idx(e2, i2))] -= prob;
                }
            };
            if i > 0 {
                go(e, i - 1, down, &mut a, &mut rhs);
                go(e, i + 1, up_each * p, &mut a, &mut rhs);
            } else if e == 0 {
                go(1, 0, down, &mut a, &mut rhs);
                go(0, 1, up_each * p, &mut a, &mut rhs);
            } else {
                go((e + 1).min(d), 0, down, &mut a, &mut rhs);
                go(e - 1, 0, up_each, &mut a, &mut rhs);
                go(e, 1, up_each * (p - 1.0), &mut a, &mut rhs);
            }
        }
    }
    let h = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular cone-oracle system".into()))?;
    Ok(ConeOracle { depth, level1: h[idx(1, 0)], level2: h[idx(2, 0)] })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeMass {
    #[serde(serialize_with = "crate::tree::serialize_vertex")]
    pub cone: TreeVertex,
    pub mass: f64,
    pub se: f64,
    pub oracle: f64,
}

/// Empirical masses of the cones of the children and grandchildren of `o`,
/// reading the limit end off the current strip.
pub fn cone_masses(strips: &[TreeVertex], params: &ModelParams, oracle: &ConeOracle) -> Vec<ConeMass> {
    let root = TreeVertex::root(params.p.max(2));
    let mut cones: Vec<(TreeVertex, f64)> = Vec::new();
    for c in (0..params.p).map(|j| root.successor(j)) {
        cones.push((c.clone(), oracle.level1));
        for g in (0..params.p).map(|j| c.successor(j)) {
            cones.push((g, oracle.level2));
        }
    }
    let n = strips.len() as f64;
    cones
        .into_iter()
        .map(|(cone, target)| {
            let k = strips.iter().filter(|w| cone.cone_contains(w)).count() as f64;
            let mass = k / n;
            ConeMass { cone, mass, se: (mass * (1.0 - mass) / n).sqrt(), oracle: target }
        })
        .collect()
}

/// One draw of `Σ A₁⋯A_{k-1} B_k` with `(A_k, B_k)` resampled from `pool`,
/// summed until the running product falls below `1e-12`.
pub fn z_infinity_sample<R: Rng + ?Sized>(pool: &[(f64, f64)], rng: &mut R) -> Result<f64> {
    let mut prod = 1.0;
    let mut sum = 0.0;
    for _ in 0..10_000_000 {
        let (a, b) = pool[rng.random_range(0..pool.len())];
        sum += prod * b;
        prod *= a;
        if prod < 1e-12 {
            return Ok(sum);
        }
    }
    Err(Error::NonTermination(10_000_000))
}

/// Affine increments `(A, B) = (q^{±1}, x)` of the exit from `ô`.
pub fn affine_pool(params: &ModelParams, samples: &[ExitSample]) -> Vec<(f64, f64)> {
    samples.iter().map(|s| (params.q.powi(s.level as i32), s.x)).collect()
}
