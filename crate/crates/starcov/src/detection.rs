//! Willie's detection statistics: asymptotic received power, the closed-form
//! detection error probability (DEP), the optimal radiometer threshold and the
//! minimum DEP it attains, large-system asymptotics, the numerically averaged
//! DEP over the jamming channel, and the smooth lower bound used as the
//! covertness design constraint.
//!
//! Probability model behind the closed forms: conditioned on Willie's own
//! channel, the Alice-signal power in the radiometer statistic is exponential
//! (mean `lambda` under H0, `lambda_tilde` under H1) because Willie only has
//! statistical knowledge of the Alice-RIS channel, while the jamming
//! contribution is `gamma * P_j` with `P_j` uniform on `[0, P_j_max]`.

use num_complex::Complex64;

use crate::model::{Beamformers, ChannelRealization, StarRisProfile};
use crate::{Error, Result};

/// Binary hypothesis at Willie.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Alice transmits public signals only.
    H0,
    /// Alice transmits public and covert signals.
    H1,
}

/// Scalar parameters of the DEP closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepParams {
    /// Mean power of the Carol-signal term at Willie (watts).
    pub lambda: f64,
    /// Mean power of the combined-signal term at Willie (watts).
    pub lambda_tilde: f64,
    /// Jamming channel gain `|h_rw^H Theta_t h_rc^*|^2` (linear).
    pub gamma: f64,
    /// Jammer maximum power (watts).
    pub p_j_max: f64,
    /// Noise power at Willie (watts).
    pub sigma2_w: f64,
}

impl DepParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.lambda_tilde >= self.lambda) {
            return Err(Error::domain("need lambda_tilde >= lambda >= 0"));
        }
        if !(self.gamma >= 0.0) || !(self.p_j_max >= 0.0) {
            return Err(Error::domain("gamma and p_j_max must be nonnegative"));
        }
        if !(self.sigma2_w > 0.0) {
            return Err(Error::domain("sigma2_w must be positive"));
        }
        Ok(())
    }

    /// `lambda_tilde - lambda` below `1e-12 * lambda_tilde` means the H0/H1
    /// statistics coincide and the DEP is identically 1.
    pub fn is_degenerate(&self) -> bool {
        self.lambda_tilde - self.lambda <= 1e-12 * self.lambda_tilde
    }

    /// `gamma * P_j_max`, the span of the jamming power term.
    fn jam_span(&self) -> f64 {
        self.gamma * self.p_j_max
    }

    /// DEP parameters as seen by Willie for a concrete realization and design.
    /// The exponential means carry the Alice-RIS large-scale gain because the
    /// stored `H_AR` does.
    pub fn from_design(
        channels: &ChannelRealization,
        profile: &StarRisProfile,
        bf: &Beamformers,
        p_j_max: f64,
        sigma2_w: f64,
    ) -> Self {
        let theta_r = profile.theta_r_diag();
        let quad: f64 = channels
            .h_rw
            .iter()
            .zip(&theta_r)
            .map(|(h, t)| (h.conj() * t).norm_sqr())
            .sum();
        let lambda = channels.l_ar * quad * bf.varpi_c();
        let lambda_tilde = channels.l_ar * quad * (bf.varpi_b() + bf.varpi_c());
        let theta_t = profile.theta_t_diag();
        let jam: Complex64 = channels
            .h_rw
            .iter()
            .zip(&theta_t)
            .zip(&channels.h_rc)
            .map(|((hw, t), hc)| hw.conj() * t * hc.conj())
            .sum();
        DepParams {
            lambda,
            lambda_tilde,
            gamma: jam.norm_sqr(),
            p_j_max,
            sigma2_w,
        }
    }
}

/// Asymptotic (large-`N`) DEP parameters, where the random quadratic form in
/// Willie's channel is replaced by its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticDep {
    /// `||w_b||^2`.
    pub varpi_b: f64,
    /// `||w_c||^2`.
    pub varpi_c: f64,
    /// `sum_n beta_r^n`.
    pub theta_r: f64,
    /// Effective large-scale gain of the Alice-RIS-Willie quadratic form.
    /// When built from a sampled system this includes the Alice-RIS hop, i.e.
    /// `l_AR * l_rw`, so that `lambda_a = l_rw * varpi_c * theta_r` matches
    /// the Monte Carlo mean of the corresponding power term.
    pub l_rw: f64,
    /// Mean of the exponential jamming gain `gamma`.
    pub lambda_rw: f64,
    /// Jammer maximum power (watts).
    pub p_j_max: f64,
}

impl AsymptoticDep {
    /// Asymptotic mean of the Carol-signal power term.
    pub fn lambda_a(&self) -> f64 {
        self.l_rw * self.varpi_c * self.theta_r
    }

    /// Asymptotic mean of the combined-signal power term.
    pub fn lambda_tilde_a(&self) -> f64 {
        self.l_rw * self.theta_r * (self.varpi_b + self.varpi_c)
    }

    /// Build from a sampled realization and design. `lambda_rw` uses the
    /// transmission-side profile applied to the stored (large-scale scaled)
    /// Carol channel.
    pub fn from_design(
        channels: &ChannelRealization,
        profile: &StarRisProfile,
        bf: &Beamformers,
        p_j_max: f64,
    ) -> Self {
        let lambda_rw: f64 = channels.l_rw
            * channels
                .h_rc
                .iter()
                .zip(&profile.beta_r)
                .map(|(h, &b)| (1.0 - b) * h.norm_sqr())
                .sum::<f64>();
        AsymptoticDep {
            varpi_b: bf.varpi_b(),
            varpi_c: bf.varpi_c(),
            theta_r: profile.theta_r_power(),
            l_rw: channels.l_ar * channels.l_rw,
            lambda_rw,
            p_j_max,
        }
    }
}

/// Willie's asymptotic average received power for one hypothesis:
/// signal term per the hypothesis, plus `gamma * P_j + sigma_w^2`.
pub fn willie_avg_power(
    channels: &ChannelRealization,
    profile: &StarRisProfile,
    bf: &Beamformers,
    p_j: f64,
    sigma2_w: f64,
    hypothesis: Hypothesis,
) -> Result<f64> {
    if p_j < 0.0 {
        return Err(Error::domain(format!("jamming power must be nonnegative, got {p_j}")));
    }
    let theta_r = profile.theta_r_diag();
    let theta_t = profile.theta_t_diag();
    // row vector h_rw^H Theta_r H_AR
    let weights: Vec<Complex64> = channels
        .h_rw
        .iter()
        .zip(&theta_r)
        .map(|(h, t)| h.conj() * t)
        .collect();
    let mut row = vec![Complex64::new(0.0, 0.0); channels.m];
    for (n, wgt) in weights.iter().enumerate() {
        for (m, r) in row.iter_mut().enumerate() {
            *r += wgt * channels.h_ar_at(n, m);
        }
    }
    let dot = |w: &[Complex64]| -> Complex64 { row.iter().zip(w).map(|(r, wi)| r * wi).sum() };
    let sig_c = dot(&bf.w_c()).norm_sqr();
    let signal = match hypothesis {
        Hypothesis::H0 => sig_c,
        Hypothesis::H1 => sig_c + dot(&bf.w_b()).norm_sqr(),
    };
    let jam: Complex64 = channels
        .h_rw
        .iter()
        .zip(&theta_t)
        .zip(&channels.h_rc)
        .map(|((hw, t), hc)| hw.conj() * t * hc.conj())
        .sum();
    Ok(signal + jam.norm_sqr() * p_j + sigma2_w)
}

/// `ln(e^x - 1)` without overflow for large `x`.
fn ln_expm1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x > 36.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// CDF of `S + Z` at `t`, with `S ~ Exp(mean lam)` (point mass at 0 when
/// `lam = 0`) and `Z ~ Uniform(0, c)`.
fn cdf_exp_plus_uniform(t: f64, lam: f64, c: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return if lam == 0.0 { 1.0 } else { -(-t / lam).exp_m1() };
    }
    if lam == 0.0 {
        return (t / c).min(1.0);
    }
    if t <= c {
        // (t - lam (1 - e^{-t/lam})) / c
        (t + lam * (-t / lam).exp_m1()) / c
    } else {
        // 1 - (lam/c) (e^{(c-t)/lam} - e^{-t/lam}); both exponents <= 0
        1.0 - (lam / c) * (((c - t) / lam).exp() - (-t / lam).exp())
    }
}

/// Detection error probability (false alarm + missed detection) of the
/// radiometer with threshold `tau`, in `[0, 1]`.
pub fn dep(tau: f64, p: &DepParams) -> f64 {
    if p.is_degenerate() {
        return 1.0;
    }
    let t = tau - p.sigma2_w;
    let c = p.jam_span();
    let value = 1.0 + cdf_exp_plus_uniform(t, p.lambda_tilde, c) - cdf_exp_plus_uniform(t, p.lambda, c);
    value.clamp(0.0, 1.0)
}

/// `ln Delta` with `Delta = (e^{c/lambda} - 1) / (e^{c/lambda_tilde} - 1)`;
/// continuous limit `ln(lambda_tilde/lambda)` at `c = 0`.
fn ln_delta(lambda: f64, lambda_tilde: f64, c: f64) -> f64 {
    if c == 0.0 {
        (lambda_tilde / lambda).ln()
    } else {
        ln_expm1(c / lambda) - ln_expm1(c / lambda_tilde)
    }
}

/// Willie's optimal detection threshold. `None` means the H0/H1 statistics
/// coincide (no informative threshold exists; the DEP is identically 1).
pub fn optimal_threshold(p: &DepParams) -> Option<f64> {
    if p.is_degenerate() {
        return None;
    }
    let c = p.jam_span();
    if p.lambda == 0.0 {
        // False alarms vanish exactly at the top of the H0 support.
        return Some(p.sigma2_w + c);
    }
    let scale = p.lambda * p.lambda_tilde / (p.lambda_tilde - p.lambda);
    Some(scale * ln_delta(p.lambda, p.lambda_tilde, c) + p.sigma2_w)
}

/// Minimum DEP over all thresholds, evaluated in closed form. Equals
/// `dep(optimal_threshold(p), p)`; 1 in the degenerate case.
pub fn min_dep(p: &DepParams) -> f64 {
    if p.is_degenerate() {
        return 1.0;
    }
    let c = p.jam_span();
    let lt = p.lambda_tilde;
    let l = p.lambda;
    if c == 0.0 {
        if l == 0.0 {
            return 0.0;
        }
        let r = lt / l;
        let denom = lt - l;
        let v = 1.0 + (-lt / denom * r.ln()).exp() - (-l / denom * r.ln()).exp();
        return v.clamp(0.0, 1.0);
    }
    let xt = c / lt;
    if l == 0.0 {
        return (1.0 - (1.0 - (-xt).exp()) / xt).clamp(0.0, 1.0);
    }
    let x = c / l;
    let ld = ln_delta(l, lt, c);
    let denom = lt - l;
    // P* = 1 - (T1 - T2)/c in log space to dodge overflow of e^{c/lambda}.
    let ln_t1 = lt.ln() + ln_expm1(xt) - (l / denom) * ld;
    let ln_t2 = l.ln() + ln_expm1(x) - (lt / denom) * ld;
    (1.0 - (ln_t1.exp() - ln_t2.exp()) / c).clamp(0.0, 1.0)
}

/// Large-system minimum DEP as a function of the jamming gain `gamma`:
/// the closed form with the asymptotic means substituted in. `gamma = 0`
/// takes the analytic limit.
pub fn asymptotic_min_dep(a: &AsymptoticDep, gamma: f64) -> f64 {
    let lambda_a = a.lambda_a();
    let lt = a.lambda_tilde_a();
    if a.varpi_b <= 0.0 || lt <= 0.0 {
        return 1.0;
    }
    let omega = a.varpi_b + a.varpi_c;
    let c = gamma * a.p_j_max;
    if c == 0.0 {
        // gamma -> 0: Delta -> lambda_tilde/lambda and the bracket collapses.
        if a.varpi_c == 0.0 {
            return 0.0;
        }
        let v = 1.0 - (a.varpi_b / omega) * (omega / a.varpi_c).powf(-a.varpi_c / a.varpi_b);
        return v.clamp(0.0, 1.0);
    }
    let xt = c / lt;
    // Delta^{-varpi_c/varpi_b} via logs; at varpi_c = 0 the product
    // varpi_c * ln Delta tends to c / (l_rw theta varpi_b).
    let ln_delta_term = if a.varpi_c == 0.0 {
        -c / (a.l_rw * a.theta_r * a.varpi_b)
    } else {
        -(a.varpi_c / a.varpi_b) * ln_delta(lambda_a, lt, c)
    };
    let ln_bracket = (a.l_rw * a.theta_r * a.varpi_b).ln() - c.ln() + ln_delta_term + ln_expm1(xt);
    (1.0 - ln_bracket.exp()).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!(
                "max recursion depth reached on [{a}, {b}], local error {err:e}"
            )));
        }
        let l = recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }

    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Upper limit for the averaged-DEP quadrature on the transformed variable
/// `u = gamma / lambda_rw`; the exponential tail beyond is below tolerance.
const AVG_DEP_U_MAX: f64 = 40.0;

/// Average of the asymptotic minimum DEP over the exponential jamming gain,
/// by adaptive quadrature on `u = gamma / lambda_rw` (absolute tolerance 1e-6).
pub fn avg_min_dep_numeric(a: &AsymptoticDep) -> Result<f64> {
    if !(a.lambda_rw > 0.0) {
        return Err(Error::domain("lambda_rw must be positive"));
    }
    let integrand = |u: f64| asymptotic_min_dep(a, a.lambda_rw * u) * (-u).exp();
    let value = adaptive_simpson(&integrand, 0.0, AVG_DEP_U_MAX, 1e-6)?;
    Ok(value.clamp(0.0, 1.0))
}

/// Smooth closed-form lower bound of the averaged minimum DEP, used inside the
/// covertness constraint. Equals
/// `1 - (varpi_b/(varpi_b+varpi_c)) * ln(1+u)/u` with
/// `u = P_j_max * lambda_rw / lambda_tilde_a`.
pub fn dep_lower_bound(a: &AsymptoticDep) -> f64 {
    let omega = a.varpi_b + a.varpi_c;
    if a.varpi_b <= 0.0 || omega <= 0.0 {
        return 1.0;
    }
    let u = a.p_j_max * a.lambda_rw / a.lambda_tilde_a();
    (1.0 - (a.varpi_b / omega) * ln1p_over_x(u)).clamp(0.0, 1.0)
}

/// `ln(1+u)/u`, continuous at 0.
pub(crate) fn ln1p_over_x(u: f64) -> f64 {
    if u < 1e-8 {
        1.0 - 0.5 * u + u * u / 3.0
    } else {
        u.ln_1p() / u
    }
}

/// Derivative of `ln(1+u)/u`, series-guarded near 0.
pub(crate) fn ln1p_over_x_deriv(u: f64) -> f64 {
    if u < 1e-4 {
        -0.5 + 2.0 * u / 3.0 - 0.75 * u * u + 0.8 * u * u * u
    } else {
        1.0 / (u * (1.0 + u)) - u.ln_1p() / (u * u)
    }
}
