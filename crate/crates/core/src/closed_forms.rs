//! Scalar laws of the skeleton of the Brownian motion on `HT(q, p)`.
//!
//! The vertical projection `Y` is a drifted Brownian motion on `R` with
//! generator `f''/ln²q + (1-α)/ln q · f'`, skewed at every integer with
//! upward weight `βp`. `τ` is the exit time from `[-1, 1]` started at 0.

use serde::Serialize;

use crate::error::{Error, Result};

const SERIES_REL_TOL: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 200;
const SERIES_MAX_ARG: f64 = 700.0;
/// `|ρ - 1|` below this counts as critical.
pub const CRITICAL_TOL: f64 = 1e-12;
/// Below this `|b|` the closed form for `E(τ)` cancels badly; the series is used.
const SMALL_B: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub q: f64,
    pub p: u32,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `ρ > 1`: the limit lies in `{∞} × ∂*T`.
    Upward,
    /// `ρ < 1`: the limit lies in `∂*H × {ω}`.
    Downward,
    /// `ρ = 1`: the process converges to `(∞, ω)`.
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub b: f64,
    pub rho: f64,
    pub exp_tau: f64,
    pub var_tau: f64,
    pub prob_up: f64,
    pub e_y: f64,
    pub var_y: f64,
    pub ell: f64,
    pub sigma2: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkeletonProbs {
    pub up_z: f64,
    pub down_z: f64,
    pub up_each_child: f64,
}

/// `k`-th derivative of `C(s) = Σ s^n/(2n)!` (odd = false) or
/// `S(s) = Σ s^n/(2n+1)!` (odd = true), summed termwise.
fn series(s: f64, odd: bool, k: u32) -> Result<f64> {
    if !s.is_finite() || s.abs() > SERIES_MAX_ARG {
        return Err(Error::Domain(format!("series argument s = {s} out of range")));
    }
    let shift = if odd { 1.0 } else { 0.0 };
    let kf = k as f64;
    // t_n = n!/(n-k)! · s^(n-k) / (2n + shift)!, starting at n = k
    let mut term = (1..=k).map(f64::from).product::<f64>()
        / (1..=(2 * k + odd as u32)).map(f64::from).product::<f64>();
    let mut sum = term;
    for n in k..k + SERIES_MAX_TERMS as u32 {
        let nf = n as f64;
        term *= (nf + 1.0) / (nf + 1.0 - kf) * s / ((2.0 * nf + 1.0 + shift) * (2.0 * nf + 2.0 + shift));
        sum += term;
        if term == 0.0 || ((nf * nf) > s.abs() && term.abs() <= SERIES_REL_TOL * sum.abs()) {
            break;
        }
    }
    Ok(sum)
}

impl ModelParams {
    pub fn new(q: f64, p: u32, alpha: f64, beta: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
        }
        if p < 1 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(ModelParams { q, p, alpha, beta })
    }

    pub fn ln_q(&self) -> f64 {
        self.q.ln()
    }

    /// `βp`, the skew weight at each bifurcation line.
    pub fn beta_p(&self) -> f64 {
        self.beta * self.p as f64
    }

    pub fn b(&self) -> f64 {
        (1.0 - self.alpha) * self.ln_q() / 2.0
    }

    pub fn s(&self, lambda: f64) -> f64 {
        let lq = self.ln_q();
        self.b().powi(2) + lq * lq * lambda
    }

    pub fn rho(&self) -> f64 {
        self.beta_p() * self.q.powf(1.0 - self.alpha)
    }

    /// `k`-th derivative of `r` at `λ`.
    fn r_deriv(&self, lambda: f64, k: u32) -> Result<f64> {
        let s = self.s(lambda);
        let bp = self.beta_p();
        let c = series(s, false, k)?;
        let sn = series(s, true, k)?;
        let chain = self.ln_q().powi(2 * k as i32);
        Ok(chain * ((bp + 1.0) * c + (bp - 1.0) * self.b() * sn))
    }

    pub fn r(&self, lambda: f64) -> Result<f64> {
        self.r_deriv(lambda, 0)
    }

    pub fn r_prime(&self, lambda: f64) -> Result<f64> {
        self.r_deriv(lambda, 1)
    }

    pub fn r_second(&self, lambda: f64) -> Result<f64> {
        self.r_deriv(lambda, 2)
    }

    fn r_positive(&self, lambda: f64) -> Result<f64> {
        let r = self.r(lambda)?;
        if r <= 0.0 {
            return Err(Error::Domain(format!(
                "Laplace transform undefined at λ = {lambda}: r(λ) = {r} is not positive"
            )));
        }
        Ok(r)
    }

    /// `E[e^{-λτ}; Y = side]`.
    pub fn laplace_joint(&self, lambda: f64, side: i8) -> Result<f64> {
        let r = self.r_positive(lambda)?;
        let b = self.b();
        match side {
            1 => Ok(self.beta_p() * b.exp() / r),
            -1 => Ok((-b).exp() / r),
            _ => Err(Error::InvalidParameter(format!("side must be ±1, got {side}"))),
        }
    }

    /// `E[e^{-λτ}]`.
    pub fn laplace_tau(&self, lambda: f64) -> Result<f64> {
        let r = self.r_positive(lambda)?;
        Ok((self.rho() + 1.0) * (-self.b()).exp() / r)
    }

    pub fn exp_tau(&self) -> f64 {
        let b = self.b();
        let lq2 = self.ln_q().powi(2);
        if self.alpha == 1.0 {
            return lq2 / 2.0;
        }
        if b.abs() < SMALL_B {
            return self.exp_tau_series();
        }
        let bp = self.beta_p();
        let (ch, sh) = (b.cosh(), b.sinh());
        let num = (bp - 1.0) * b * ch + ((bp + 1.0) * b - (bp - 1.0)) * sh;
        let den = (bp + 1.0) * ch + (bp - 1.0) * sh;
        lq2 / (2.0 * b * b) * num / den
    }

    /// `r'(0) e^b / (ρ + 1)`.
    pub fn exp_tau_series(&self) -> f64 {
        self.r_prime(0.0).expect("s(0) = b² is in range") * self.b().exp() / (self.rho() + 1.0)
    }

    pub fn var_tau(&self) -> f64 {
        let e = self.exp_tau_series();
        let r2 = self.r_second(0.0).expect("s(0) = b² is in range");
        e * e - r2 * self.b().exp() / (self.rho() + 1.0)
    }

    pub fn skeleton_probs(&self) -> SkeletonProbs {
        let rho = self.rho();
        SkeletonProbs {
            up_z: rho / (1.0 + rho),
            down_z: 1.0 / (1.0 + rho),
            up_each_child: rho / ((1.0 + rho) * self.p as f64),
        }
    }

    /// Probability that a skew point sends the process upward.
    pub fn skew_up(&self) -> f64 {
        let bp = self.beta_p();
        bp / (bp + 1.0)
    }

    pub fn escape_rate(&self) -> f64 {
        let rho = self.rho();
        self.ln_q() / self.exp_tau() * (rho - 1.0) / (rho + 1.0)
    }

    /// Variance of the vertical CLT, in units of `Y`.
    pub fn clt_sigma2(&self) -> f64 {
        let rho = self.rho();
        let e = self.exp_tau();
        let var_y = 4.0 * rho / (rho + 1.0).powi(2);
        let ell = self.escape_rate();
        var_y / e + ell * ell * self.var_tau() / (e * self.ln_q().powi(2))
    }

    pub fn regime(&self) -> Regime {
        let rho = self.rho();
        if (rho - 1.0).abs() <= CRITICAL_TOL {
            Regime::Critical
        } else if rho > 1.0 {
            Regime::Upward
        } else {
            Regime::Downward
        }
    }

    pub fn closed_forms(&self) -> ClosedForms {
        let rho = self.rho();
        let regime = self.regime();
        let ell = if regime == Regime::Critical { 0.0 } else { self.escape_rate() };
        ClosedForms {
            b: self.b(),
            rho,
            exp_tau: self.exp_tau(),
            var_tau: self.var_tau(),
            prob_up: rho / (rho + 1.0),
            e_y: (rho - 1.0) / (rho + 1.0),
            var_y: 4.0 * rho / (rho + 1.0).powi(2),
            ell,
            sigma2: self.clt_sigma2(),
            regime,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mp(q: f64, p: u32, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(q, p, alpha, beta).unwrap()
    }

    fn grid() -> Vec<ModelParams> {
        let mut out = Vec::new();
        for &q in &[1.5, 2.0, 3.0, 7.0] {
            for &p in &[1u32, 2, 3, 5] {
                for &alpha in &[-1.0, 0.0, 0.5, 1.0, 1.7, 3.0] {
                    for &beta in &[0.2, 0.5, 1.0, 2.0] {
                        out.push(mp(q, p, alpha, beta));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1.0, 2, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2.0, 0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2.0, 2, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 2, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn r_at_zero_examples() {
        let m = mp(2.0, 1, 1.0, 1.0);
        assert_eq!(m.b(), 0.0);
        assert_relative_eq!(m.r(0.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn series_matches_hyperbolic_and_trig_forms() {
        for m in [mp(2.0, 2, 0.3, 0.7), mp(3.0, 1, 1.0, 2.0), mp(1.5, 5, 2.5, 0.3)] {
            let bp = m.beta_p();
            let b = m.b();
            for i in -40..=40 {
                let lambda = i as f64 * 0.25;
                let s = m.s(lambda);
                let expected = if s >= 0.0 {
                    let rs = s.sqrt();
                    let sinc = if rs == 0.0 { 1.0 } else { rs.sinh() / rs };
                    (bp + 1.0) * rs.cosh() + (bp - 1.0) * b * sinc
                } else {
                    let rs = (-s).sqrt();
                    (bp + 1.0) * rs.cos() + (bp - 1.0) * b * rs.sin() / rs
                };
                let got = m.r(lambda).unwrap();
                assert!((got - expected).abs() <= 1e-14 * expected.abs().max(1.0), "λ={lambda}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn series_range_error() {
        let m = mp(2.0, 2, 1.0, 1.0);
        assert!(m.r(5000.0).is_err());
        assert!(m.laplace_tau(5000.0).is_err());
    }

    #[test]
    fn laplace_domain_error_past_first_pole() {
        let m = mp(2.0, 1, 1.0, 1.0);
        // r = 2 cos sqrt(-s); first zero at s = -(π/2)²
        let lambda = -(std::f64::consts::PI / 2.0).powi(2) / 2f64.ln().powi(2) - 0.1;
        assert!(matches!(m.laplace_tau(lambda), Err(Error::Domain(_))));
    }

    #[test]
    fn laplace_identities() {
        for m in grid() {
            assert_relative_eq!(m.laplace_tau(0.0).unwrap(), 1.0, epsilon = 1e-12);
            let rho = m.rho();
            assert_relative_eq!(m.laplace_joint(0.0, 1).unwrap(), rho / (rho + 1.0), epsilon = 1e-12);
            for i in 0..20 {
                let lambda = i as f64 * 0.3;
                let up = m.laplace_joint(lambda, 1).unwrap();
                let down = m.laplace_joint(lambda, -1).unwrap();
                let tau = m.laplace_tau(lambda).unwrap();
                assert!((up - tau * rho / (rho + 1.0)).abs() < 1e-12);
                assert!((up + down - tau).abs() < 1e-12);
            }
            assert!(m.laplace_joint(0.0, 0).is_err());
        }
    }

    #[test]
    fn expected_tau_examples() {
        let m = mp(2.0, 2, 1.0, 1.0);
        assert_relative_eq!(m.exp_tau(), 0.240_226_506_959_100_7, epsilon = 1e-15);
        assert_relative_eq!(m.exp_tau_series(), m.exp_tau(), epsilon = 1e-14);
    }

    #[test]
    fn expected_tau_branches_agree() {
        for m in grid() {
            let closed = m.exp_tau();
            let series = m.exp_tau_series();
            assert!((closed - series).abs() <= 1e-10 * closed, "{m:?}: {closed} vs {series}");
        }
        for alpha in [1.0 + 1e-5, 1.0 - 3e-4, 1.0 + 2e-3] {
            let m = mp(2.0, 3, alpha, 0.6);
            assert!((m.exp_tau() - m.exp_tau_series()).abs() <= 1e-10 * m.exp_tau());
        }
    }

    #[test]
    fn moments_match_numerical_derivatives() {
        let h = 1e-5;
        for m in grid() {
            let lp = m.laplace_tau(h).unwrap();
            let lm = m.laplace_tau(-h).unwrap();
            let first = -(lp - lm) / (2.0 * h);
            assert!((first - m.exp_tau()).abs() < 1e-6 * m.exp_tau().max(1.0));
            let h2 = 1e-3;
            let l0 = m.laplace_tau(0.0).unwrap();
            let second = (m.laplace_tau(h2).unwrap() - 2.0 * l0 + m.laplace_tau(-h2).unwrap()) / (h2 * h2);
            let var = second - first * first;
            let scale = m.var_tau().max(1.0);
            assert!(m.var_tau() >= 0.0);
            assert!((var - m.var_tau()).abs() < 1e-4 * scale, "{m:?}: {var} vs {}", m.var_tau());
        }
    }

    #[test]
    fn variance_drift_free_oracle() {
        // driftless symmetric case: τ is the exit time of sqrt(2)/ln q · W from
        // [-1, 1], so E τ = ln²q/2 and Var τ = (2/3)(ln²q/2)²
        let m = mp(3.0, 1, 1.0, 1.0);
        let e = 3f64.ln().powi(2) / 2.0;
        assert_relative_eq!(m.var_tau(), 2.0 / 3.0 * e * e, epsilon = 1e-13);
    }

    #[test]
    fn skeleton_probability_examples() {
        let m = mp(2.0, 2, 1.0, 1.0);
        let pr = m.skeleton_probs();
        assert_relative_eq!(pr.up_z, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(pr.up_each_child, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(pr.up_z + pr.down_z, 1.0);
        let crit = mp(2.0, 2, 1.0, 0.5).skeleton_probs();
        assert_eq!((crit.up_z, crit.down_z), (0.5, 0.5));
    }

    #[test]
    fn escape_and_sigma_examples() {
        let m = mp(2.0, 2, 1.0, 1.0);
        assert_relative_eq!(m.escape_rate(), 0.961_796_693_925_976, epsilon = 1e-12);
        assert_eq!(m.regime(), Regime::Upward);
        let crit = mp(2.0, 2, 1.0, 0.5);
        assert_eq!(crit.regime(), Regime::Critical);
        assert_eq!(crit.closed_forms().ell, 0.0);
        assert_relative_eq!(crit.clt_sigma2(), 4.162_737_962_011_215, epsilon = 1e-12);
        assert_eq!(mp(2.0, 2, 1.0, 0.25).regime(), Regime::Downward);
        // ρ = 2·2^(1-α) crosses 1 at α = 2
        assert_eq!(mp(2.0, 2, 2.0, 1.0).regime(), Regime::Critical);
    }

    #[test]
    fn closed_forms_invariants() {
        for m in grid() {
            let cf = m.closed_forms();
            assert_relative_eq!(cf.rho, m.beta_p() * (2.0 * cf.b).exp(), max_relative = 1e-12);
            assert_relative_eq!(cf.e_y, 2.0 * cf.prob_up - 1.0, epsilon = 1e-15);
            assert_relative_eq!(cf.var_y, 1.0 - cf.e_y * cf.e_y, epsilon = 1e-14);
            assert!(cf.sigma2 >= 0.0 && cf.exp_tau > 0.0 && cf.var_tau > 0.0);
            let sign = |v: f64| if v.abs() < 1e-14 { 0 } else if v > 0.0 { 1 } else { -1 };
            let expect = match cf.regime {
                Regime::Upward => 1,
                Regime::Downward => -1,
                Regime::Critical => 0,
            };
            assert_eq!(sign(cf.ell), expect, "{m:?}");
        }
    }

    proptest! {
        #[test]
        fn ell_sign_follows_rho(q in 1.1f64..8.0, p in 1u32..6, alpha in -3.0f64..4.0, beta in 0.05f64..5.0) {
            let m = mp(q, p, alpha, beta);
            let rho = m.rho();
            prop_assume!((rho - 1.0).abs() > 1e-9);
            prop_assert_eq!(m.escape_rate() > 0.0, rho > 1.0);
            prop_assert!((m.exp_tau() - m.exp_tau_series()).abs() <= 1e-10 * m.exp_tau());
        }
    }
}
