//! The walk observed at the successive line-visit times `τ(n)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::closed_forms::ModelParams;
use crate::error::{Error, Result};
use crate::tree::TreeVertex;
use crate::vertical::VerticalScheme;

/// Step budget for one exit-time sample.
pub const MAX_STEPS: u64 = 1_000_000_000;

/// A seed plus a stream id; equal pairs give equal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonState {
    #[serde(serialize_with = "crate::tree::serialize_vertex")]
    pub vertex: TreeVertex,
    pub clock: f64,
    pub n: u64,
}

/// `+1` with probability `ρ/(ρ+1)`, else `-1`.
pub fn step_side<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> i8 {
    if rng.random::<f64>() < params.skeleton_probs().up_z {
        1
    } else {
        -1
    }
}

/// Predecessor for a down step, a uniform successor for an up step.
pub fn step_vertex<R: Rng + ?Sized>(v: &TreeVertex, side: i8, params: &ModelParams, rng: &mut R) -> TreeVertex {
    if side < 0 {
        v.predecessor()
    } else if params.p == 1 {
        v.successor(0)
    } else {
        v.successor(rng.random_range(0..params.p))
    }
}

/// Exit time from `[-1, 1]` of the vertical diffusion started at `y0`,
/// with the skew point at 0, and the side of exit.
pub fn sample_exit<R: Rng + ?Sized>(params: &ModelParams, y0: f64, rng: &mut R, dt: f64) -> Result<(f64, i8)> {
    if !(-1.0..=1.0).contains(&y0) {
        return Err(Error::InvalidParameter(format!("start {y0} outside [-1, 1]")));
    }
    if y0.abs() == 1.0 {
        return Ok((0.0, y0.signum() as i8));
    }
    let scheme = VerticalScheme::new(params, dt)?;
    let mut y = y0;
    for k in 0..MAX_STEPS {
        let step = scheme.step(y, rng)?;
        if let Some(t) = step.touch {
            if t.level != 0 {
                return Ok(((k as f64 + t.theta) * dt, t.level.signum() as i8));
            }
        }
        y = step.y;
    }
    Err(Error::NonTermination(MAX_STEPS))
}

/// `(τ, Y_τ)` for the skeleton increment started on a line.
pub fn sample_tau<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R, dt: f64) -> Result<(f64, i8)> {
    sample_exit(params, 0.0, rng, dt)
}

/// `n_steps` skeleton transitions from the root. Sides are drawn exactly and
/// sojourn times from the exit-time sampler; by independence of `Y` and `τ`
/// this has the joint law of the increments.
pub fn run_skeleton<R: Rng + ?Sized>(
    params: &ModelParams,
    n_steps: u64,
    rng: &mut R,
    dt: f64,
) -> Result<Vec<SkeletonState>> {
    if n_steps < 1 {
        return Err(Error::InvalidParameter("need at least one skeleton step".into()));
    }
    let base = params.p.max(2);
    let mut state = SkeletonState { vertex: TreeVertex::root(base), clock: 0.0, n: 0 };
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    out.push(state.clone());
    for _ in 0..n_steps {
        let (tau, _) = sample_tau(params, rng, dt)?;
        let side = step_side(params, rng);
        state = SkeletonState {
            vertex: step_vertex(&state.vertex, side, params, rng),
            clock: state.clock + tau,
            n: state.n + 1,
        };
        out.push(state.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(q: f64, p: u32, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(q, p, alpha, beta).unwrap()
    }

    fn within(got: f64, expect: f64, se: f64, k: f64) -> bool {
        (got - expect).abs() <= k * se
    }

    #[test]
    fn side_frequencies() {
        for (params, target) in [(mp(2.0, 2, 1.0, 0.5), 0.5), (mp(2.0, 2, 1.0, 1.0), 2.0 / 3.0)] {
            let mut rng = RngStream::new(1, 0).rng();
            let n = 1_000_000;
            let ups = (0..n).filter(|_| step_side(&params, &mut rng) == 1).count();
            let se = (target * (1.0 - target) / n as f64).sqrt();
            assert!(within(ups as f64 / n as f64, target, se, 3.0));
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let draw = |s: RngStream| {
            let mut rng = s.rng();
            (0..64).map(|_| step_side(&params, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(RngStream::new(5, 3)), draw(RngStream::new(5, 3)));
        assert_ne!(draw(RngStream::new(5, 3)), draw(RngStream::new(5, 4)));
    }

    #[test]
    fn child_frequencies_uniform() {
        let params = mp(2.0, 3, 1.0, 1.0);
        let mut rng = RngStream::new(2, 0).rng();
        let root = TreeVertex::root(3);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let w = step_vertex(&root, 1, &params, &mut rng);
            assert_eq!(w.hor(), 1);
            counts[w.child_index() as usize] += 1;
        }
        let se = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        for c in counts {
            assert!(within(c as f64 / n as f64, 1.0 / 3.0, se, 3.0));
        }
        assert_eq!(step_vertex(&root, -1, &params, &mut rng).hor(), -1);
        let line = mp(2.0, 1, 1.0, 1.0);
        let v = TreeVertex::root(2);
        assert_eq!(step_vertex(&v, 1, &line, &mut rng), v.successor(0));
    }

    #[test]
    fn exit_from_boundary_start_is_immediate() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let mut rng = RngStream::new(0, 0).rng();
        assert_eq!(sample_exit(&params, 1.0, &mut rng, 1e-3).unwrap(), (0.0, 1));
        assert!(sample_exit(&params, 1.5, &mut rng, 1e-3).is_err());
    }

    #[test]
    fn tau_sampler_matches_closed_forms() {
        let params = mp(2.0, 2, 1.0, 0.5);
        let mut rng = RngStream::new(3, 0).rng();
        let n = 20_000;
        let samples: Vec<(f64, i8)> = (0..n).map(|_| sample_tau(&params, &mut rng, 1e-4).unwrap()).collect();
        let mean = samples.iter().map(|s| s.0).sum::<f64>() / n as f64;
        assert!((mean / params.exp_tau() - 1.0).abs() < 0.03, "{mean}");
        let lap = samples.iter().map(|s| (-s.0).exp()).sum::<f64>() / n as f64;
        assert!((lap / params.laplace_tau(1.0).unwrap() - 1.0).abs() < 0.01);
        let ups = samples.iter().filter(|s| s.1 == 1).count() as f64 / n as f64;
        assert!(within(ups, 0.5, (0.25 / n as f64).sqrt(), 3.0));
    }

    #[test]
    fn skeleton_telescopes() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let mut rng = RngStream::new(4, 0).rng();
        let path = run_skeleton(&params, 500, &mut rng, 1e-3).unwrap();
        assert_eq!(path.len(), 501);
        for pair in path.windows(2) {
            assert_eq!((pair[1].vertex.hor() - pair[0].vertex.hor()).abs(), 1);
            assert!(pair[1].clock > pair[0].clock);
            assert_eq!(pair[1].n, pair[0].n + 1);
        }
        assert!(run_skeleton(&params, 0, &mut rng, 1e-3).is_err());
    }
}
