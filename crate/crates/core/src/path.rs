//! Euler scheme for Brownian motion on `HT(q, p)`.
//!
//! The state is the strip `S_v` (by its upper vertex `v`), the real
//! coordinate `x` and the Busemann height `Y ∈ [hor v - 1, hor v]`. `Y` moves
//! by the skew scheme of [`crate::vertical`]; a touched line `L_u` sends the
//! process either into the strip below (`S_u`) or into one of the `p` strips
//! above, chosen uniformly. `x` moves by `√2 q^Y √dt N` with the pre-step `Y`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::ModelParams;
use crate::error::{Error, Result};
use crate::skeleton::RngStream;
use crate::tree::{TreePoint, TreeVertex};
use crate::treebolic::{HTParams, HTPoint, DEFAULT_TOL};
use crate::vertical::VerticalScheme;

/// Largest admissible time step.
pub const MAX_DT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: u64,
    pub seed: u64,
    /// Tolerance of the distance minimization.
    pub tol: f64,
    /// Negate every horizontal increment.
    pub mirror_x: bool,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = SimConfig { dt, horizon, record_stride: 1, seed, tol: DEFAULT_TOL, mirror_x: false };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, stride: u64) -> Result<Self> {
        self.record_stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be finite and at least dt, got {}",
                self.horizon
            )));
        }
        if self.record_stride < 1 {
            return Err(Error::InvalidParameter("record stride must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub strip: TreeVertex,
    pub x: f64,
    pub y: f64,
    pub clock: f64,
    /// Number of skeleton times `τ(n) <= clock`, not counting `τ(0)`.
    pub n_t: u64,
    /// `Y_{τ(n_t)}` once the process has visited a line.
    pub last_level: Option<i64>,
}

impl PathState {
    pub fn start(z: &HTPoint) -> Self {
        let w = &z.w;
        let y = w.hor();
        PathState {
            strip: w.upper().clone(),
            x: z.x,
            y,
            clock: 0.0,
            n_t: 0,
            last_level: w.is_vertex().then(|| w.upper().level()),
        }
    }

    pub fn at_line(&self) -> bool {
        self.y == self.y.floor()
    }

    pub fn tree_point(&self) -> TreePoint {
        TreePoint::on_edge(&self.strip, self.y)
    }

    pub fn point(&self) -> HTPoint {
        HTPoint::new(self.x, self.tree_point())
    }
}

/// A skeleton time `τ(n)`: the line reached and the vertex it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonEvent {
    pub n: u64,
    pub time: f64,
    pub level: i64,
    #[serde(serialize_with = "crate::tree::serialize_vertex")]
    pub vertex: TreeVertex,
    /// Abscissa at the end of the step containing the event.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub path: u64,
    pub t: f64,
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub vertex: String,
    pub n_t: u64,
    pub dist: Option<f64>,
}

/// Everything needed to advance one path by one step.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: ModelParams,
    pub scheme: VerticalScheme,
    ln_q: f64,
    x_scale: f64,
    mirror: f64,
}

impl Stepper {
    pub fn new(params: &ModelParams, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Stepper {
            params: *params,
            scheme: VerticalScheme::new(params, config.dt)?,
            ln_q: params.ln_q(),
            x_scale: (2.0 * config.dt).sqrt(),
            mirror: if config.mirror_x { -1.0 } else { 1.0 },
        })
    }

    pub fn dt(&self) -> f64 {
        self.scheme.dt
    }

    /// Advance `state` with explicit Gaussian increments `(n1, n2)` for `x`
    /// and `Y`; `uniform` supplies the bridge, side and child draws.
    pub fn step_with(
        &self,
        state: &mut PathState,
        n1: f64,
        n2: f64,
        mut uniform: impl FnMut() -> f64,
    ) -> Result<Option<SkeletonEvent>> {
        let dt = self.scheme.dt;
        let dx = self.mirror * self.x_scale * (self.ln_q * state.y).exp() * n1;
        let v = self.scheme.step_with(state.y, n2, &mut uniform)?;
        let t0 = state.clock;
        state.x += dx;
        state.y = v.y;
        state.clock += dt;
        let Some(touch) = v.touch else { return Ok(None) };

        let top = state.strip.level();
        let line = if touch.level == top {
            state.strip.clone()
        } else if touch.level == top - 1 {
            state.strip.predecessor()
        } else {
            return Err(Error::NumericalFailure(format!(
                "touched line {} from strip at level {top}",
                touch.level
            )));
        };
        state.strip = if touch.up {
            let j = if self.params.p == 1 {
                0
            } else {
                ((uniform() * self.params.p as f64) as u32).min(self.params.p - 1)
            };
            line.successor(j)
        } else {
            line.clone()
        };
        if state.last_level == Some(touch.level) {
            return Ok(None);
        }
        state.n_t += 1;
        state.last_level = Some(touch.level);
        Ok(Some(SkeletonEvent {
            n: state.n_t,
            time: t0 + touch.theta * dt,
            level: touch.level,
            vertex: line,
            x: state.x,
        }))
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut PathState, rng: &mut R) -> Result<Option<SkeletonEvent>> {
        let n1: f64 = StandardNormal.sample(rng);
        let n2: f64 = StandardNormal.sample(rng);
        self.step_with(state, n1, n2, || rng.random())
    }
}

/// One Euler step, returning the new state.
pub fn step_euler<R: Rng + ?Sized>(
    state: &PathState,
    params: &ModelParams,
    config: &SimConfig,
    rng: &mut R,
) -> Result<PathState> {
    let stepper = Stepper::new(params, config)?;
    let mut next = state.clone();
    stepper.step(&mut next, rng)?;
    Ok(next)
}

/// `d_HT(X_t, ô)`.
pub fn distance_to_origin(state: &PathState, params: &ModelParams) -> f64 {
    let ht = HTParams::new(params.q, params.p).expect("validated parameters");
    ht.distance(&state.point(), &ht.origin())
}

/// The random stream of path `path` under `config`.
pub fn path_rng(config: &SimConfig, path: u64) -> ChaCha8Rng {
    RngStream::new(config.seed, path).rng()
}

fn record(path: u64, state: &PathState, params: &ModelParams, with_distance: bool) -> TrajectoryRecord {
    TrajectoryRecord {
        path,
        t: state.clock,
        x: state.x,
        y: state.y,
        vertex: state.strip.to_string(),
        n_t: state.n_t,
        dist: with_distance.then(|| distance_to_origin(state, params)),
    }
}

/// Simulate path number `path` from `start`, recording every
/// `record_stride` steps (and the initial state).
pub fn simulate_path(
    params: &ModelParams,
    config: &SimConfig,
    start: &HTPoint,
    path: u64,
    with_distance: bool,
) -> Result<Vec<TrajectoryRecord>> {
    let stepper = Stepper::new(params, config)?;
    let mut rng = path_rng(config, path);
    let mut state = PathState::start(start);
    let steps = config.steps();
    let mut out = vec![record(path, &state, params, with_distance)];
    for k in 1..=steps {
        stepper.step(&mut state, &mut rng)?;
        state.clock = k as f64 * config.dt;
        if k % config.record_stride == 0 || k == steps {
            out.push(record(path, &state, params, with_distance));
        }
    }
    Ok(out)
}

/// States at the requested times (rounded to the step grid, ascending), and
/// the skeleton events up to the last of them when `keep_events` is set.
#[derive(Debug, Clone)]
pub struct PathRun {
    pub path: u64,
    pub snapshots: Vec<PathState>,
    pub events: Vec<SkeletonEvent>,
}

pub fn run_to_times(
    params: &ModelParams,
    config: &SimConfig,
    start: &HTPoint,
    path: u64,
    times: &[f64],
    keep_events: bool,
) -> Result<PathRun> {
    let stepper = Stepper::new(params, config)?;
    let mut rng = path_rng(config, path);
    let mut state = PathState::start(start);
    let mut snapshots = Vec::with_capacity(times.len());
    let mut events = Vec::new();
    let mut k = 0u64;
    for &t in times {
        let target = (t / config.dt).round() as u64;
        if target < k {
            return Err(Error::InvalidParameter("snapshot times must ascend".into()));
        }
        while k < target {
            let ev = stepper.step(&mut state, &mut rng)?;
            k += 1;
            state.clock = k as f64 * config.dt;
            if keep_events {
                events.extend(ev);
            }
        }
        snapshots.push(state.clone());
    }
    Ok(PathRun { path, snapshots, events })
}

/// Run from `start` until the first skeleton time `τ(1)`.
pub fn run_to_first_event<R: Rng + ?Sized>(
    stepper: &Stepper,
    start: &HTPoint,
    rng: &mut R,
) -> Result<(SkeletonEvent, PathState)> {
    let mut state = PathState::start(start);
    for _ in 0..crate::skeleton::MAX_STEPS {
        if let Some(ev) = stepper.step(&mut state, rng)? {
            return Ok((ev, state));
        }
    }
    Err(Error::NonTermination(crate::skeleton::MAX_STEPS))
}

/// `run_to_times` over paths `0..n_paths` in parallel, in path order.
pub fn run_many(
    params: &ModelParams,
    config: &SimConfig,
    start: &HTPoint,
    n_paths: u64,
    times: &[f64],
) -> Result<Vec<PathRun>> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| run_to_times(params, config, start, i, times, false))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicRational;

    fn mp(q: f64, p: u32, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(q, p, alpha, beta).unwrap()
    }

    fn origin(p: u32) -> HTPoint {
        HTParams::new(2.0, p).unwrap().origin()
    }

    #[test]
    fn config_guards() {
        assert!(SimConfig::new(0.02, 1.0, 0).is_err());
        assert!(SimConfig::new(1e-3, 1e-4, 0).is_err());
        assert!(SimConfig::new(1e-3, 1.0, 0).unwrap().with_stride(0).is_err());
        assert_eq!(SimConfig::new(1e-3, 1.0, 0).unwrap().steps(), 1000);
    }

    #[test]
    fn deterministic_step_without_noise() {
        let params = mp(2.0, 2, 0.5, 1.0);
        let cfg = SimConfig::new(1e-4, 1.0, 0).unwrap();
        let stepper = Stepper::new(&params, &cfg).unwrap();
        let v = TreeVertex::root(2).successor(1);
        let mut state = PathState::start(&HTPoint::new(0.0, TreePoint::new(v, 0.5).unwrap()));
        assert_eq!(state.y, 0.5);
        stepper.step_with(&mut state, 0.0, 0.0, || 1.0).unwrap();
        assert!((state.y - 0.5 - 0.5 / 2f64.ln() * 1e-4).abs() < 1e-15);
        assert_eq!(state.x, 0.0);
    }

    #[test]
    fn line_touch_moves_strip() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let cfg = SimConfig::new(1e-4, 1.0, 0).unwrap();
        let stepper = Stepper::new(&params, &cfg).unwrap();
        let root = TreeVertex::root(2);
        // from the origin, going up into child 1
        let mut draws = [0.1, 0.9].into_iter();
        let mut state = PathState::start(&origin(2));
        let ev = stepper.step_with(&mut state, 0.0, 0.3, || draws.next().unwrap()).unwrap();
        assert!(ev.is_none(), "starting line is τ(0)");
        assert_eq!(state.strip, root.successor(1));
        assert!(state.y > 0.0);
        // down through the lower line lands in the strip of the root
        state.y = 1e-4;
        let mut draws = [0.9].into_iter();
        stepper.step_with(&mut state, 0.0, -1.0, || draws.next().unwrap()).unwrap();
        assert_eq!(state.strip, root);
        assert!(state.y < 0.0);
        assert_eq!(state.n_t, 0);
        // reaching level -1 is the next skeleton time
        state.y = -1.0 + 1e-4;
        let mut draws = [0.9].into_iter();
        let ev = stepper.step_with(&mut state, 0.0, -1.0, || draws.next().unwrap()).unwrap().unwrap();
        assert_eq!((ev.n, ev.level), (1, -1));
        assert_eq!(ev.vertex, root.predecessor());
        assert_eq!(state.strip, root.predecessor());
    }

    #[test]
    fn distance_along_a_branch() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let mut state = PathState::start(&origin(2));
        assert_eq!(distance_to_origin(&state, &params), 0.0);
        let v = TreeVertex::new(&PadicRational::from_int(2, 5), 3);
        state.strip = v;
        state.y = 3.0;
        assert!((distance_to_origin(&state, &params) - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let params = mp(2.0, 3, 0.7, 0.8);
        let cfg = SimConfig::new(1e-3, 2.0, 9).unwrap().with_stride(100).unwrap();
        let a = simulate_path(&params, &cfg, &origin(3), 4, true).unwrap();
        let b = simulate_path(&params, &cfg, &origin(3), 4, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 21);
        assert_eq!(a[0].dist, Some(0.0));
        let other = simulate_path(&params, &cfg, &origin(3), 5, true).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn mirrored_paths_share_vertical_motion() {
        let params = mp(2.0, 2, 0.5, 1.0);
        let cfg = SimConfig::new(1e-3, 3.0, 1).unwrap().with_stride(50).unwrap();
        let mirrored = SimConfig { mirror_x: true, ..cfg };
        let a = simulate_path(&params, &cfg, &origin(2), 0, false).unwrap();
        let b = simulate_path(&params, &mirrored, &origin(2), 0, false).unwrap();
        for (r, s) in a.iter().zip(&b) {
            assert_eq!((r.y, &r.vertex, r.n_t), (s.y, &s.vertex, s.n_t));
            assert_eq!(r.x, -s.x);
        }
    }

    #[test]
    fn snapshots_hit_requested_times() {
        let params = mp(2.0, 2, 1.0, 1.0);
        let cfg = SimConfig::new(1e-3, 1.0, 0).unwrap();
        let run = run_to_times(&params, &cfg, &origin(2), 0, &[0.25, 0.5, 1.0], true).unwrap();
        let clocks: Vec<f64> = run.snapshots.iter().map(|s| s.clock).collect();
        assert_eq!(clocks, vec![0.25, 0.5, 1.0]);
        assert_eq!(run.events.len() as u64, run.snapshots[2].n_t);
        for w in run.events.windows(2) {
            assert_eq!((w[1].level - w[0].level).abs(), 1);
            assert!(w[1].time > w[0].time);
        }
        assert!(run_to_times(&params, &cfg, &origin(2), 0, &[0.5, 0.25], false).is_err());
    }
}
