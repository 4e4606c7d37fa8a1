//! The acceptance suite. Each criterion runs at fixed seeds and reports a
//! single pass/fail outcome with the measured statistics.
//!
//! The heavy path ensembles are simulated once per process and shared by the
//! criteria that read them.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, SampleSummary};
use crate::closed_forms::ModelParams;
use crate::error::{Error, Result};
use crate::hyperbolic::{self, HPoint};
use crate::isometry::{bs_word, reflect, AfElement, AffT};
use crate::padic::{PadicRational, Valuation};
use crate::path::{self, PathRun, PathState, SimConfig, Stepper};
use crate::skeleton::{self, RngStream};
use crate::tree::{TreePoint, TreeVertex};
use crate::treebolic::{HTParams, HTPoint};

/// Criteria that need only exact or deterministic computation.
pub const QUICK: [u8; 3] = [1, 8, 9];
pub const ALL: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

/// Default time step of the Monte Carlo criteria.
pub const DT: f64 = 1e-4;
/// Paths in the CLT ensembles.
pub const CLT_PATHS: u64 = 2000;
/// Paths entering the escape-rate mean.
pub const ESCAPE_PATHS: usize = 200;
/// Horizon of the drifted ensemble, in units of `E(τ)`.
pub const HORIZON_TAUS: f64 = 200.0;
/// Horizon of the drift-free ensemble, in units of `E(τ)`.
pub const DRIFT_FREE_HORIZON_TAUS: f64 = 3200.0;
/// Time step of the drift-free ensemble.
pub const DRIFT_FREE_DT: f64 = 1e-3;
/// Horizon of the downward ensemble, in units of `E(τ)`.
pub const DOWNWARD_HORIZON_TAUS: f64 = 50.0;

const SEED: u64 = 0x7472_6565;

fn seed(criterion: u64, part: u64) -> u64 {
    SEED ^ (criterion << 32) ^ part
}

fn params(q: f64, p: u32, alpha: f64, beta: f64) -> ModelParams {
    ModelParams::new(q, p, alpha, beta).expect("fixed parameters are valid")
}

/// `ρ = 2`, drift from the skew alone.
pub fn upward() -> ModelParams {
    params(2.0, 2, 1.0, 1.0)
}

/// `ρ = 1`.
pub fn drift_free() -> ModelParams {
    params(2.0, 2, 1.0, 0.5)
}

/// `ρ = 1/2`.
pub fn downward() -> ModelParams {
    params(2.0, 2, 1.0, 0.25)
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {tag}  {}", self.id, self.title)?;
        for d in &self.details {
            write!(f, "\n    {d}")?;
        }
        Ok(())
    }
}

struct Checks {
    passed: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { passed: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.passed &= ok;
        self.details.push(format!("[{}] {msg}", if ok { "ok" } else { "x " }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("[..] {msg}"));
    }

    fn finish(self, id: u8, title: &'static str) -> Outcome {
        Outcome { id, title, passed: self.passed, details: self.details }
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "closed-form consistency",
        2 => "exit-time sampler against the closed-form laws",
        3 => "pathwise first exits against the exit-time sampler",
        4 => "rate of escape",
        5 => "vertical CLT",
        6 => "distance CLT with drift",
        7 => "drift-free distance limit",
        8 => "geometry suite",
        9 => "group suite",
        10 => "exit measure",
        11 => "boundary regimes",
        _ => "unknown criterion",
    }
}

/// Run one criterion; errors are reported as failures.
pub fn run_criterion(id: u8) -> Outcome {
    let result = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        _ => Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    result.unwrap_or_else(|e| Outcome {
        id,
        title: title(id),
        passed: false,
        details: vec![format!("[x ] error: {e}")],
    })
}

pub fn run(ids: &[u8]) -> Vec<Outcome> {
    ids.iter().map(|&id| run_criterion(id)).collect()
}

fn criterion_1() -> Result<Outcome> {
    let mut c = Checks::new();
    let mut worst_e: f64 = 0.0;
    let mut worst_l: f64 = 0.0;
    let mut count = 0;
    for &alpha in &[0.0, 0.5, 1.0, 1.5, 2.0] {
        for &q in &[2.0, std::f64::consts::E] {
            for p in 1..=3u32 {
                for &beta in &[0.2, 1.0 / p as f64, 1.0] {
                    let m = ModelParams::new(q, p, alpha, beta)?;
                    let rel = (m.exp_tau() - m.exp_tau_series()).abs() / m.exp_tau_series();
                    worst_e = worst_e.max(rel);
                    worst_l = worst_l.max((m.laplace_tau(0.0)? - 1.0).abs());
                    count += 1;
                }
            }
        }
    }
    c.check(worst_e <= 1e-10, format!("E(τ) closed form vs r'(0)e^b/(ρ+1): max rel. diff {worst_e:.2e} over {count} sets (tol 1e-10)"));
    c.check(worst_l <= 1e-12, format!("Laplace transform at 0: max |L(0) - 1| = {worst_l:.2e} (tol 1e-12)"));
    Ok(c.finish(1, title(1)))
}

fn criterion_2() -> Result<Outcome> {
    let mut c = Checks::new();
    let n = 100_000u64;
    for (k, m) in [drift_free(), params(2.0, 2, 0.5, 1.0)].into_iter().enumerate() {
        let s: Vec<(f64, i8)> = (0..n)
            .into_par_iter()
            .map(|i| skeleton::sample_tau(&m, &mut RngStream::new(seed(2, k as u64), i).rng(), DT))
            .collect::<Result<_>>()?;
        let taus: Vec<f64> = s.iter().map(|x| x.0).collect();
        let sum = SampleSummary::new(&taus);
        let e = m.exp_tau();
        let tol = (4.0 * sum.se).max(0.02 * e);
        let label = format!("(q,p,α,β)=({},{},{},{})", m.q, m.p, m.alpha, m.beta);
        c.check(
            (sum.mean - e).abs() <= tol,
            format!("{label}: mean τ {:.5} vs E(τ) {e:.5} (tol {tol:.5})", sum.mean),
        );
        let pu = m.skeleton_probs().up_z;
        let up = s.iter().filter(|x| x.1 == 1).count() as f64 / n as f64;
        let se = (pu * (1.0 - pu) / n as f64).sqrt();
        c.check((up - pu).abs() <= 3.0 * se, format!("{label}: P̂[Y=1] {up:.5} vs {pu:.5} (3SE {:.5})", 3.0 * se));
        let lap = taus.iter().map(|t| (-t).exp()).sum::<f64>() / n as f64;
        let target = m.laplace_tau(1.0)?;
        c.check(
            (lap / target - 1.0).abs() <= 0.01,
            format!("{label}: Ê(e^-τ) {lap:.5} vs {target:.5} (tol 1%)"),
        );
    }
    Ok(c.finish(2, title(2)))
}

fn criterion_3() -> Result<Outcome> {
    let mut c = Checks::new();
    let m = upward();
    let n = 10_000u64;
    let o = HTParams::new(m.q, m.p)?.origin();
    let cfg = SimConfig::new(DT, DT, seed(3, 0))?;
    let stepper = Stepper::new(&m, &cfg)?;
    let from_paths: Vec<(f64, i64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed(3, 0), i).rng();
            path::run_to_first_event(&stepper, &o, &mut rng).map(|(ev, _)| (ev.time, ev.level))
        })
        .collect::<Result<_>>()?;
    let from_skeleton: Vec<(f64, i8)> = (0..n)
        .into_par_iter()
        .map(|i| skeleton::sample_tau(&m, &mut RngStream::new(seed(3, 1), i).rng(), DT))
        .collect::<Result<_>>()?;
    let a: Vec<f64> = from_paths.iter().map(|x| x.0).collect();
    let b: Vec<f64> = from_skeleton.iter().map(|x| x.0).collect();
    let ks = analysis::ks_two_sample(&a, &b).statistic;
    c.check(ks < 0.02, format!("KS(τ(1) path, τ skeleton) = {ks:.4}, N = {n} each (tol 0.02)"));
    let ua = from_paths.iter().filter(|x| x.1 == 1).count() as f64 / n as f64;
    let ub = from_skeleton.iter().filter(|x| x.1 == 1).count() as f64 / n as f64;
    let se = (ua * (1.0 - ua) / n as f64 + ub * (1.0 - ub) / n as f64).sqrt();
    c.check((ua - ub).abs() <= 3.0 * se, format!("up-exit frequency path {ua:.4} vs skeleton {ub:.4} (3SE {:.4})", 3.0 * se));
    Ok(c.finish(3, title(3)))
}

/// A shared path ensemble from `ô`, with snapshots at the given fractions
/// of the horizon.
pub struct Ensemble {
    pub params: ModelParams,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub runs: Vec<PathRun>,
}

impl Ensemble {
    fn simulate(params: ModelParams, horizon: f64, dt: f64, fractions: &[f64], seed: u64) -> Result<Self> {
        let cfg = SimConfig::new(dt, horizon, seed)?;
        let o = HTParams::new(params.q, params.p)?.origin();
        let times: Vec<f64> = fractions.iter().map(|f| f * horizon).collect();
        let runs = path::run_many(&params, &cfg, &o, CLT_PATHS, &times)?;
        Ok(Ensemble { params, horizon, times, runs })
    }

    pub fn states(&self, k: usize) -> Vec<PathState> {
        self.runs.iter().map(|r| r.snapshots[k].clone()).collect()
    }

    pub fn distances(&self, k: usize) -> Vec<f64> {
        self.runs
            .par_iter()
            .map(|r| path::distance_to_origin(&r.snapshots[k], &self.params))
            .collect()
    }
}

fn shared(cell: &'static OnceLock<Result<Ensemble>>, init: impl FnOnce() -> Result<Ensemble>) -> Result<&'static Ensemble> {
    cell.get_or_init(init).as_ref().map_err(Clone::clone)
}

/// `ρ = 2` ensemble to `200 E(τ)`, snapshots at half and full horizon.
pub fn upward_ensemble() -> Result<&'static Ensemble> {
    static CELL: OnceLock<Result<Ensemble>> = OnceLock::new();
    shared(&CELL, || {
        let m = upward();
        Ensemble::simulate(m, HORIZON_TAUS * m.exp_tau(), DT, &[0.5, 1.0], seed(4, 0))
    })
}

/// `ρ = 1` ensemble to `3200 E(τ)`, snapshots at `200 E(τ)`, `T/4`, `T/2`, `T`.
pub fn drift_free_ensemble() -> Result<&'static Ensemble> {
    static CELL: OnceLock<Result<Ensemble>> = OnceLock::new();
    shared(&CELL, || {
        let m = drift_free();
        let fractions = [HORIZON_TAUS / DRIFT_FREE_HORIZON_TAUS, 0.25, 0.5, 1.0];
        Ensemble::simulate(m, DRIFT_FREE_HORIZON_TAUS * m.exp_tau(), DRIFT_FREE_DT, &fractions, seed(7, 0))
    })
}

fn criterion_4() -> Result<Outcome> {
    let mut c = Checks::new();
    let ens = upward_ensemble()?;
    let m = ens.params;
    let t = ens.horizon;
    let finals = ens.states(1);
    let rep = analysis::estimate_escape_rate(&finals[..ESCAPE_PATHS], &m, t);
    let target = rep.target;
    let rel = rep.rate.mean / target - 1.0;
    c.check(
        rel.abs() <= 0.05,
        format!(
            "d_HT(X_T,ô)/T = {:.5} ± {:.5} vs |ℓ| = {target:.5} ({:+.2}%, tol 5%), {} paths, T = {t:.2}",
            rep.rate.mean, rep.rate.se, rel * 100.0, ESCAPE_PATHS
        ),
    );
    let rel_tree = rep.tree_rate.mean / target - 1.0;
    c.check(
        rel_tree.abs() <= 0.05,
        format!("ln q·d_T(W_T,o)/T = {:.5} ({:+.2}%, tol 5%)", rep.tree_rate.mean, rel_tree * 100.0),
    );
    let d_half = SampleSummary::new(&ens.distances(0)).mean;
    let d_full = SampleSummary::new(&ens.distances(1)).mean;
    c.note(format!(
        "all {} paths: E d(X_T) - |ℓ|T = {:.3} at T, {:.3} at T/2; increment rate (d(T)-d(T/2))/(T/2) = {:.5}",
        CLT_PATHS,
        d_full - target * t,
        d_half - target * t / 2.0,
        (d_full - d_half) / (t / 2.0)
    ));
    Ok(c.finish(4, title(4)))
}

fn criterion_5() -> Result<Outcome> {
    let mut c = Checks::new();
    let up = upward_ensemble()?;
    let rep = analysis::vertical_clt(&up.states(1), &up.params, up.horizon);
    c.check(
        rep.ks.statistic < 0.05,
        format!(
            "ρ = 2, t = {:.2}: KS = {:.4} (tol 0.05), standardized mean {:.4}, variance {:.4}",
            up.horizon, rep.ks.statistic, rep.standardized.mean, rep.standardized.variance
        ),
    );
    let free = drift_free_ensemble()?;
    let t = free.times[0];
    let rep = analysis::vertical_clt(&free.states(0), &free.params, t);
    c.check(
        rep.ks.statistic < 0.05,
        format!(
            "ρ = 1, t = {t:.2}: KS = {:.4} (tol 0.05), standardized mean {:.4}, variance {:.4}",
            rep.ks.statistic, rep.standardized.mean, rep.standardized.variance
        ),
    );
    Ok(c.finish(5, title(5)))
}

fn criterion_6() -> Result<Outcome> {
    let mut c = Checks::new();
    let ens = upward_ensemble()?;
    let rep = analysis::distance_clt(&ens.distances(1), &ens.params, ens.horizon)?;
    let u = rep.distance_units;
    c.check(
        u.ks.statistic < 0.07,
        format!(
            "KS vs N(0, ln²q·σ²) = {:.4} (tol 0.07); standardized mean {:.4}, variance {:.4}",
            u.ks.statistic, u.standardized.mean, u.standardized.variance
        ),
    );
    c.note(format!("KS vs N(0, σ²) with σ² in Y-units: {:.4}", rep.literal.ks.statistic));
    Ok(c.finish(6, title(6)))
}

fn criterion_7() -> Result<Outcome> {
    let mut c = Checks::new();
    let ens = drift_free_ensemble()?;
    let m = ens.params;
    let limit = analysis::drift_free_limit_samples(&m, seed(7, 1), 10_000, 10_000)?;
    for (k, &t) in ens.times.iter().enumerate() {
        let ks = analysis::drift_free_clt(&ens.distances(k), &m, t, &limit)?;
        let msg = format!("t = {t:.2} ({:.0} E(τ)): KS = {:.4}", t / m.exp_tau(), ks.statistic);
        if k + 1 == ens.times.len() {
            c.check(ks.statistic < 0.07, format!("{msg} (tol 0.07), {} paths vs {} limit draws", CLT_PATHS, limit.len()));
        } else {
            c.note(msg);
        }
    }
    let maxima: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| analysis::brownian_extremes(&mut RngStream::new(seed(7, 2), i).rng(), 10_000).0)
        .collect();
    let s = SampleSummary::new(&maxima);
    let target = (2.0 / std::f64::consts::PI).sqrt();
    c.check(
        (s.mean - target).abs() <= 3.0 * s.se,
        format!("E[M̄] = {:.5} vs √(2/π) = {target:.5} (3SE {:.5})", s.mean, 3.0 * s.se),
    );
    Ok(c.finish(7, title(7)))
}

fn random_padic<R: Rng + ?Sized>(rng: &mut R, p: u32) -> PadicRational {
    let num: i64 = rng.random_range(-100_000..=100_000);
    PadicRational::new(p, num, rng.random_range(0..4)).expect("base >= 2")
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, p: u32) -> HTPoint {
    let level = rng.random_range(-4..=4);
    let v = TreeVertex::new(&random_padic(rng, p), level);
    let offset = if rng.random::<f64>() < 0.3 { 1.0 } else { rng.random_range(0.01..1.0) };
    HTPoint::new(rng.random_range(-20.0..20.0), TreePoint::new(v, offset).expect("offset in (0, 1]"))
}

fn tree_bfs_mismatches(p: u32) -> (usize, usize) {
    let root = TreeVertex::new(&PadicRational::zero(p), -3);
    let mut verts = vec![root.clone()];
    let mut frontier = vec![root];
    for _ in 0..6 {
        let next: Vec<_> = frontier.iter().flat_map(|u| u.successors()).collect();
        verts.extend(next.iter().cloned());
        frontier = next;
    }
    let index: HashMap<&TreeVertex, usize> = verts.iter().enumerate().map(|(i, u)| (u, i)).collect();
    let mut adj = vec![Vec::new(); verts.len()];
    for (i, u) in verts.iter().enumerate() {
        for s in u.successors() {
            if let Some(&j) = index.get(&s) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let bad: usize = (0..verts.len())
        .into_par_iter()
        .map(|s| {
            let mut dist = vec![usize::MAX; verts.len()];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
            (0..verts.len()).filter(|&t| verts[s].distance(&verts[t]) != dist[t] as i64).count()
        })
        .sum();
    (bad, verts.len() * verts.len())
}

fn criterion_8() -> Result<Outcome> {
    let mut c = Checks::new();
    let n = 100_000u64;
    let sandwich_bad: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed(8, 0), i).rng();
            let (q, p) = [(2.0, 2u32), (3.0, 3), (1.5, 2), (2.0, 3)][i as usize % 4];
            let ht = HTParams::new(q, p).expect("valid");
            let (a, b) = (random_point(&mut rng, p), random_point(&mut rng, p));
            let d = ht.distance(&a, &b);
            let s = ht.sandwich(&a, &b);
            let slack = 1e-9 * (1.0 + d);
            usize::from(!(s.lower - slack <= d && d <= s.upper + slack))
        })
        .sum();
    c.check(sandwich_bad == 0, format!("sandwich lower ≤ d ≤ upper (δ = ln(1+√2)): {sandwich_bad} violations in {n} pairs"));
    let (conf_bad, worst, split_worst) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed(8, 1), i).rng();
            let mut pt = || HPoint::new(rng.random_range(-30.0..30.0), rng.random_range(-5.0f64..5.0).exp()).expect("y > 0");
            let (a, b) = (pt(), pt());
            let top = hyperbolic::apex(&a, &b);
            let d = hyperbolic::distance(&a, &b);
            let gap = (d - (2.0 * top.y.ln() - a.y.ln() - b.y.ln())).abs();
            let split = (hyperbolic::distance(&a, &top) + hyperbolic::distance(&top, &b) - d).abs();
            (usize::from(gap > 4f64.ln()), gap, split)
        })
        .reduce(|| (0, 0.0, 0.0), |x, y| (x.0 + y.0, x.1.max(y.1), x.2.max(y.2)));
    c.check(conf_bad == 0, format!("|d_H - (2 ln Im apex - ln y1 - ln y2)| ≤ ln 4: max {worst:.4} in {n} pairs"));
    c.check(split_worst <= 1e-9, format!("apex split additivity: max defect {split_worst:.2e} (tol 1e-9)"));
    for p in [2u32, 3] {
        let (bad, pairs) = tree_bfs_mismatches(p);
        c.check(bad == 0, format!("tree distance vs BFS, p = {p}, depth 6: {bad} mismatches in {pairs} pairs"));
    }
    Ok(c.finish(8, title(8)))
}

fn random_af<R: Rng + ?Sized>(rng: &mut R, q: f64, p: u32) -> AfElement {
    let k = rng.random_range(-3..=3);
    AfElement::from_parts(q, rng.random_range(-4.0..4.0), AffT { k, c: random_padic(rng, p) })
}

fn ultra_violations(seed_: u64, n: u64) -> usize {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed_, i).rng();
            let p = [2u32, 3, 5, 6][i as usize % 4];
            let (u, v) = (random_padic(&mut rng, p), random_padic(&mut rng, p));
            let m: i64 = rng.random_range(-6..=6);
            let mut bad = 0;
            // (i) |u| = 0 iff u = 0
            bad += usize::from((u.valuation() == Valuation::Infinite) != u.is_zero());
            // (ii) ultrametric
            bad += usize::from((&u + &v).valuation() < u.valuation().min(v.valuation()));
            // (iii) multiplicativity, equality for prime bases
            let (vu, vv, vuv) = (u.valuation(), v.valuation(), (&u * &v).valuation());
            if let (Some(a), Some(b)) = (vu.finite(), vv.finite()) {
                let prod = vuv.finite().expect("nonzero product");
                bad += usize::from(if p == 6 { prod < a + b } else { prod != a + b });
            }
            // (iv) |p^m v| = p^-m |v|
            if let Some(b) = vv.finite() {
                bad += usize::from(v.mul_pow(m).valuation() != Valuation::Finite(b + m));
            }
            bad
        })
        .sum()
}

fn criterion_9() -> Result<Outcome> {
    let mut c = Checks::new();
    let n = 10_000u64;
    let worst = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed(9, 0), i).rng();
            let (q, p) = [(2.0, 2u32), (3.0, 2), (2.0, 3)][i as usize % 3];
            let ht = HTParams::new(q, p).expect("valid");
            let g = random_af(&mut rng, q, p);
            let (a, b) = (random_point(&mut rng, p), random_point(&mut rng, p));
            let d = ht.distance(&a, &b);
            let moved = (ht.distance(&g.act(&a), &g.act(&b)) - d).abs();
            let mirrored = (ht.distance(&reflect(&a), &reflect(&b)) - d).abs();
            moved.max(mirrored)
        })
        .reduce(|| 0.0, f64::max);
    c.check(worst <= 1e-8, format!("isometry and reflection invariance of d_HT: max defect {worst:.2e} over {n} elements (tol 1e-8)"));
    let modular_bad: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed(9, 1), i).rng();
            let (a, b) = (random_af(&mut rng, 3.0, 2), random_af(&mut rng, 3.0, 2));
            let ab = a.compose(&b);
            let exps = ab.phi() == a.phi() + b.phi();
            let value = (ab.modular() - a.modular() * b.modular()).abs() <= 1e-12 * ab.modular();
            usize::from(!(exps && value))
        })
        .sum();
    c.check(modular_bad == 0, format!("Δ(ab) = Δ(a)Δ(b): {modular_bad} failures in {n} pairs (exponents exact)"));
    let mut bs_ok = true;
    for p in [2u32, 3, 5] {
        bs_ok &= bs_word("ab", p)? == bs_word(&format!("b^{p} a"), p)?;
    }
    c.check(bs_ok, "ab = b^p a as exact matrices for p = 2, 3, 5".into());
    let mut rng = RngStream::new(seed(9, 2), 0).rng();
    let (lhs, rhs) = (bs_word("ab", 2)?.to_af(), bs_word("bba", 2)?.to_af());
    let vertex_bad = (0..100)
        .filter(|_| {
            let v = TreeVertex::new(&random_padic(&mut rng, 2), rng.random_range(-5..=5));
            lhs.tree().apply_vertex(&v) != rhs.tree().apply_vertex(&v)
        })
        .count();
    c.check(vertex_bad == 0, format!("ab and b²a agree on 100 random vertices: {vertex_bad} mismatches"));
    let ultra = ultra_violations(seed(9, 3), 100_000);
    c.check(ultra == 0, format!("norm axioms on 100000 random triples: {ultra} violations"));
    Ok(c.finish(9, title(9)))
}

fn criterion_10() -> Result<Outcome> {
    let mut c = Checks::new();
    let m = upward();
    let ht = HTParams::new(m.q, m.p)?;
    let o = ht.origin();
    let n = 100_000u64;
    let samples = analysis::exit_samples(&m, &o, n, seed(10, 0), DT)?;
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let hist = analysis::exit_measure_histogram(samples, 0.0, 5.0, 10);
    let probs = m.skeleton_probs();
    c.check(
        hist.lines.len() == m.p as usize + 1,
        format!("{} of {} lines hit", hist.lines.len(), m.p + 1),
    );
    let mut mass_ok = true;
    let mut masses = Vec::new();
    for l in &hist.lines {
        let target = if l.line.level() < 0 { probs.down_z } else { probs.up_each_child };
        let se = (target * (1.0 - target) / n as f64).sqrt();
        mass_ok &= (l.mass - target).abs() <= 3.0 * se;
        masses.push(format!("{}: {:.4}/{:.4}", l.line, l.mass, target));
    }
    c.check(mass_ok, format!("line masses within 3SE: {}", masses.join(", ")));
    let empty: usize = hist.lines.iter().map(|l| l.bins.iter().filter(|&&b| b == 0).count()).sum();
    c.check(empty == 0, format!("unit bins over [-5, 5] on every line: {empty} empty"));
    let (skew, se) = analysis::skewness_with_se(&xs, 25);
    c.check(skew.abs() < 3.0 * se, format!("x-marginal skewness {skew:.4} (3SE {:.4}, batch means)", 3.0 * se));

    let g = AfElement::from_parts(m.q, 0.75, AffT { k: 1, c: PadicRational::from_int(2, 1) });
    let shifted = analysis::exit_samples(&m, &g.act(&o), 20_000, seed(10, 1), DT)?;
    let inv = g.inverse();
    let pulled: Vec<f64> = shifted.iter().map(|s| inv.plane().apply(s.x)).collect();
    let ks = analysis::ks_two_sample(&pulled, &xs).statistic;
    let lines_back = shifted
        .iter()
        .all(|s| hist.lines.iter().any(|l| l.line == inv.tree().apply_vertex(&s.line)));
    c.check(ks < 0.05 && lines_back, format!("start g·ô, pulled back by g⁻¹: KS = {ks:.4} (tol 0.05), lines map back: {lines_back}"));
    Ok(c.finish(10, title(10)))
}

fn criterion_11() -> Result<Outcome> {
    let mut c = Checks::new();
    // ρ > 1
    let up = upward_ensemble()?;
    let oracle = analysis::cone_oracle(&up.params, 12)?;
    let oracle10 = analysis::cone_oracle(&up.params, 10)?;
    let strips: Vec<TreeVertex> = up.runs.iter().map(|r| r.snapshots[1].strip.clone()).collect();
    let cones = analysis::cone_masses(&strips, &up.params, &oracle);
    let ok = cones.iter().all(|k| (k.mass - k.oracle).abs() <= 3.0 * k.se);
    let listing: Vec<String> = cones.iter().map(|k| format!("{} {:.4}", k.cone, k.mass)).collect();
    c.check(
        ok,
        format!(
            "ρ = 2 cone masses vs depth-12 oracle ({:.4} level 1, {:.4} level 2) within 3SE: {}",
            oracle.level1,
            oracle.level2,
            listing.join(", ")
        ),
    );
    c.note(format!("oracle depth 10 vs 12: |Δ| = {:.2e}", (oracle.level1 - oracle10.level1).abs()));

    // ρ < 1
    let m = downward();
    let o = HTParams::new(m.q, m.p)?.origin();
    let pool = analysis::affine_pool(&m, &analysis::exit_samples(&m, &o, 20_000, seed(11, 0), DT)?);
    let z: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| analysis::z_infinity_sample(&pool, &mut RngStream::new(seed(11, 1), i).rng()))
        .collect::<Result<_>>()?;
    let t = DOWNWARD_HORIZON_TAUS * m.exp_tau();
    let cfg = SimConfig::new(DT, t, seed(11, 2))?;
    let x: Vec<f64> = path::run_many(&m, &cfg, &o, CLT_PATHS, &[t])?
        .into_iter()
        .map(|r| r.snapshots[0].x)
        .collect();
    let ks = analysis::ks_two_sample(&x, &z).statistic;
    c.check(ks < 0.05, format!("ρ = 1/2: KS(x_T, Z∞ series) = {ks:.4} (tol 0.05), T = {t:.2}, {} paths", CLT_PATHS));

    // ρ = 1, diagnostic only
    let free = drift_free_ensemble()?;
    let medians: Vec<f64> = (1..free.times.len())
        .map(|k| {
            let mut ax: Vec<f64> = free.runs.iter().map(|r| r.snapshots[k].x.abs()).collect();
            ax.sort_by(f64::total_cmp);
            ax[ax.len() / 2]
        })
        .collect();
    let signs: Vec<i64> = free.runs.iter().map(|r| r.snapshots.last().map_or(0, |s| s.y.floor() as i64).signum()).collect();
    let pos = signs.iter().filter(|&&s| s > 0).count();
    let neg = signs.iter().filter(|&&s| s < 0).count();
    let increasing = medians.windows(2).all(|w| w[1] > w[0]);
    c.note(format!(
        "ρ = 1 (non-gating): median |x_t| at T/4, T/2, T = {:.3e}, {:.3e}, {:.3e} (increasing: {increasing}); final hor > 0: {pos}, < 0: {neg}",
        medians[0], medians[1], medians[2]
    ));
    Ok(c.finish(11, title(11)))
}
