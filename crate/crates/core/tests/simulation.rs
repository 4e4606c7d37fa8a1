use rand_distr::{Distribution, StandardNormal};
use treebolic::analysis::{self, SampleSummary};
use treebolic::closed_forms::ModelParams;
use treebolic::path::{self, SimConfig, Stepper};
use treebolic::skeleton::{self, RngStream};
use treebolic::tree::TreePoint;
use treebolic::treebolic::{HTParams, HTPoint};

fn mp(q: f64, p: u32, alpha: f64, beta: f64) -> ModelParams {
    ModelParams::new(q, p, alpha, beta).unwrap()
}

fn origin(m: &ModelParams) -> HTPoint {
    HTParams::new(m.q, m.p).unwrap().origin()
}

#[test]
fn path_events_follow_the_skeleton_walk() {
    let m = mp(2.0, 2, 1.0, 1.0);
    let n_events = 8;
    let n = 600u64;
    let cfg = SimConfig::new(1e-3, 20.0 * n_events as f64 * m.exp_tau(), 21).unwrap();
    let o = origin(&m);
    let mut path_hor = Vec::new();
    let mut path_time = Vec::new();
    for i in 0..n {
        let run = path::run_to_times(&m, &cfg, &o, i, &[cfg.horizon], true).unwrap();
        let ev = &run.events[n_events - 1];
        assert_eq!(ev.n, n_events as u64);
        for w in run.events.windows(2) {
            assert_eq!((w[1].level - w[0].level).abs(), 1);
            assert_eq!(w[1].vertex.distance(&w[0].vertex), 1);
        }
        path_hor.push(ev.level as f64);
        path_time.push(ev.time);
    }
    let mut skel_hor = Vec::new();
    let mut skel_time = Vec::new();
    for i in 0..n {
        let s = skeleton::run_skeleton(&m, n_events as u64, &mut RngStream::new(22, i).rng(), 1e-3).unwrap();
        skel_hor.push(s[n_events].vertex.hor() as f64);
        skel_time.push(s[n_events].clock);
    }
    for (a, b) in [(&path_hor, &skel_hor), (&path_time, &skel_time)] {
        let (sa, sb) = (SampleSummary::new(a), SampleSummary::new(b));
        let se = (sa.se * sa.se + sb.se * sb.se).sqrt();
        assert!((sa.mean - sb.mean).abs() < 4.0 * se, "{} vs {}", sa.mean, sb.mean);
    }
    // E hor(τ(n)) = n (ρ-1)/(ρ+1) and E τ(n) = n E(τ)
    let e_hor = n_events as f64 / 3.0;
    let s = SampleSummary::new(&skel_hor);
    assert!((s.mean - e_hor).abs() < 4.0 * s.se);
    let t = SampleSummary::new(&path_time);
    assert!((t.mean - n_events as f64 * m.exp_tau()).abs() < 4.0 * t.se);
}

#[test]
fn plane_case_has_gaussian_strip_interior_marginal() {
    // p = 1, α = 1, β = 1: the vertical motion is an unbiased Brownian motion
    let m = mp(2.0, 1, 1.0, 1.0);
    let t = 0.02;
    let start = HTPoint::new(0.0, TreePoint::on_edge(&origin(&m).w.upper().successor(0), 0.5));
    let cfg = SimConfig::new(1e-4, t, 5).unwrap();
    let runs = path::run_many(&m, &cfg, &start, 4000, &[t]).unwrap();
    let sd = (2.0 * t).sqrt() / m.ln_q();
    let z: Vec<f64> = runs.iter().map(|r| (r.snapshots[0].y - 0.5) / sd).collect();
    let ks = analysis::ks_one_sample(&z, analysis::standard_normal_cdf);
    assert!(ks.statistic < 0.03, "{}", ks.statistic);
}

#[test]
fn exit_time_mean_is_accurate_at_fine_dt() {
    // drifted case: the scheme is first order in dt at the lines
    let m = mp(2.0, 2, 0.5, 1.0);
    let n = 40_000u64;
    let mean = |dt: f64, seed: u64| {
        let xs: Vec<f64> = (0..n)
            .map(|i| skeleton::sample_tau(&m, &mut RngStream::new(seed, i).rng(), dt).unwrap().0)
            .collect();
        SampleSummary::new(&xs)
    };
    let coarse = mean(1e-2, 31);
    let fine = mean(1e-3, 32);
    let e = m.exp_tau();
    assert!((fine.mean - e).abs() < 4.0 * fine.se, "{} vs {e}", fine.mean);
    assert!((coarse.mean - e).abs() / e < 0.1, "{} vs {e}", coarse.mean);
}

#[test]
fn symmetric_case_has_no_vertical_drift() {
    // α = 1, βp = 1: ρ = 1, the skeleton hor is a simple symmetric walk
    let m = mp(3.0, 3, 1.0, 1.0 / 3.0);
    assert!((m.rho() - 1.0).abs() < 1e-15);
    assert_eq!(m.escape_rate(), 0.0);
    let t = 2.0;
    let cfg = SimConfig::new(1e-3, t, 9).unwrap();
    let runs = path::run_many(&m, &cfg, &origin(&m), 2000, &[t]).unwrap();
    let y: Vec<f64> = runs.iter().map(|r| r.snapshots[0].y).collect();
    let s = SampleSummary::new(&y);
    assert!(s.mean.abs() < 4.0 * s.se, "{}", s.mean);
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    assert!(analysis::ks_two_sample(&y, &neg).statistic < 0.05);
    let var = 2.0 * t / m.ln_q().powi(2);
    assert!((s.variance / var - 1.0).abs() < 0.1, "{} vs {var}", s.variance);
}

#[test]
fn stepper_is_reproducible_from_the_same_normals() {
    let m = mp(2.0, 2, 1.0, 1.0);
    let cfg = SimConfig::new(1e-3, 1.0, 0).unwrap();
    let stepper = Stepper::new(&m, &cfg).unwrap();
    let mut rng = RngStream::new(4, 0).rng();
    let draws: Vec<(f64, f64)> = (0..500)
        .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let run = || {
        let mut s = path::PathState::start(&origin(&m));
        for &(a, b) in &draws {
            stepper.step_with(&mut s, a, b, || 0.3).unwrap();
        }
        (s.x, s.y, s.strip.clone())
    };
    assert_eq!(run(), run());
}
