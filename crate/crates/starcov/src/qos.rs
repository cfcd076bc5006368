//! Communication-outage closed forms at Bob and Carol, the exponential
//! integral they need, the inverse-outage bisection for Carol's interference
//! quantile, and the effective rates used as objective and QoS constraint.

use num_complex::Complex64;

use crate::model::{Beamformers, ChannelRealization, StarRisProfile, SystemParams};
use crate::{Error, Result};

/// Deterministic link power gains for one realization and design (watts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    /// `|h_rb^H Theta_r H_AR w_b|^2` — Bob's signal.
    pub g_bb: f64,
    /// `|h_rb^H Theta_r H_AR w_c|^2` — public-signal leakage into Bob.
    pub g_bc: f64,
    /// `|h_rb^H Theta_t h_rc^*|^2` — jamming leakage into Bob.
    pub g_bj: f64,
    /// `|h_rc^H Theta_t H_AR w_c|^2` — Carol's signal.
    pub g_cc_sig: f64,
    /// `|h_rc^H Theta_t H_AR w_b|^2` — covert-signal leakage into Carol.
    pub g_cb: f64,
}

impl LinkGains {
    pub fn compute(channels: &ChannelRealization, profile: &StarRisProfile, bf: &Beamformers) -> Self {
        let theta_r = profile.theta_r_diag();
        let theta_t = profile.theta_t_diag();
        let hw_b = channels.h_ar_mul(&bf.w_b());
        let hw_c = channels.h_ar_mul(&bf.w_c());

        let quad = |h: &[Complex64], theta: &[Complex64], s: &[Complex64]| -> f64 {
            let acc: Complex64 = h
                .iter()
                .zip(theta)
                .zip(s)
                .map(|((hn, tn), sn)| hn.conj() * tn * sn)
                .sum();
            acc.norm_sqr()
        };

        let jam: Complex64 = channels
            .h_rb
            .iter()
            .zip(&theta_t)
            .zip(&channels.h_rc)
            .map(|((hb, t), hc)| hb.conj() * t * hc.conj())
            .sum();

        LinkGains {
            g_bb: quad(&channels.h_rb, &theta_r, &hw_b),
            g_bc: quad(&channels.h_rb, &theta_r, &hw_c),
            g_bj: jam.norm_sqr(),
            g_cc_sig: quad(&channels.h_rc, &theta_t, &hw_c),
            g_cb: quad(&channels.h_rc, &theta_t, &hw_b),
        }
    }
}

/// Exponential integral `Ei(x)` for strictly negative arguments,
/// `Ei(x) = -int_{-x}^inf e^{-t}/t dt`. Power series up to `|x| = 6`, a
/// continued fraction beyond; absolute error below 1e-12.
pub fn expint_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::domain(format!("Ei is implemented for x < 0 only, got {x}")));
    }
    Ok(-exp1(-x))
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E1(y)` for `y > 0`.
fn exp1(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y <= 6.0 {
        // E1(y) = -gamma - ln y + sum_{k>=1} (-1)^{k+1} y^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=120 {
            term *= -y / k as f64;
            let contrib = -term / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs().max(1.0) {
                break;
            }
        }
        -EULER_GAMMA - y.ln() + sum
    } else {
        // Continued fraction e^{-y} / (y + 1/(1 + 1/(y + 2/(1 + ...)))),
        // evaluated by modified Lentz.
        let tiny = 1e-300;
        // terms: b0 = y, then alternating a_k with b alternating 1, y
        let mut b = y;
        let mut a;
        let mut f = b;
        let mut c = f;
        let mut d = 0.0;
        for k in 1..=200 {
            a = ((k + 1) / 2) as f64; // 1,1,2,2,3,3,...
            b = if k % 2 == 1 { 1.0 } else { y };
            d = b + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-y).exp() / f
    }
}

/// Bob's communication outage probability at target rate `r_b`, driven by the
/// uniformly distributed jamming power.
pub fn outage_bob(gains: &LinkGains, r_b: f64, params: &SystemParams) -> f64 {
    let snr_gap = (2f64.powf(r_b) - 1.0).max(f64::MIN_POSITIVE);
    let upsilon = (gains.g_bb - snr_gap * (gains.g_bc + params.sigma2_b)) / (snr_gap * gains.g_bj);
    if upsilon > params.p_j_max {
        0.0
    } else if upsilon >= 0.0 {
        1.0 - upsilon / params.p_j_max
    } else {
        1.0
    }
}

/// Carol's outage numerator margin for target rate `r_c` (watts).
pub fn carol_margin(gains: &LinkGains, r_c: f64, params: &SystemParams) -> f64 {
    let snr_gap = (2f64.powf(r_c) - 1.0).max(f64::MIN_POSITIVE);
    (gains.g_cc_sig - snr_gap * (gains.g_cb + params.sigma2_c)) / snr_gap
}

/// `e^{-u} + u Ei(-u)` for `u >= 0`: Carol's outage as a function of the
/// normalized margin. Strictly decreasing from 1 to 0.
fn carol_outage_kernel(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u == 0.0 {
        return 1.0;
    }
    if u > 700.0 {
        return 0.0;
    }
    ((-u).exp() + u * expint_ei(-u).expect("u > 0")).clamp(0.0, 1.0)
}

/// Carol's outage probability at margin `margin` (see [`carol_margin`]),
/// driven by the jamming power and the exponential self-interference gain.
pub fn outage_carol_at_margin(margin: f64, params: &SystemParams) -> f64 {
    if margin < 0.0 {
        return 1.0;
    }
    if params.phi_sic == 0.0 || params.p_j_max == 0.0 {
        // no self-interference at all: outage iff the margin is negative
        return 0.0;
    }
    carol_outage_kernel(margin / (params.phi_sic * params.p_j_max))
}

/// Carol's outage probability at target rate `r_c`.
pub fn outage_carol(gains: &LinkGains, r_c: f64, params: &SystemParams) -> f64 {
    outage_carol_at_margin(carol_margin(gains, r_c, params), params)
}

/// The margin `sigma*` at which Carol's outage equals `kappa`, found by
/// bisection on the strictly decreasing outage kernel (residual below 1e-10).
pub fn sigma_star(kappa: f64, phi_sic: f64, p_j_max: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let scale = phi_sic * p_j_max;
    if scale <= 0.0 {
        // Outage is 0 for any nonnegative margin: sigma* = 0.
        return Ok(0.0);
    }
    // Bracket [0, b] with the kernel value at b below kappa.
    let mut b = 1.0;
    let mut doublings = 0;
    while carol_outage_kernel(b) > kappa {
        b *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::domain("failed to bracket the outage quantile"));
        }
    }
    let mut lo = 0.0;
    let mut hi = b;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = carol_outage_kernel(mid);
        if (v - kappa).abs() <= 1e-12 {
            return Ok(mid * scale);
        }
        if v > kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let residual = carol_outage_kernel(mid) - kappa;
    if residual.abs() > 1e-10 {
        return Err(Error::domain(format!("bisection residual {residual:e} above tolerance")));
    }
    Ok(mid * scale)
}

/// Bob's effective rate: the largest target rate with outage at most `iota`.
pub fn rate_bb(gains: &LinkGains, params: &SystemParams) -> f64 {
    let sigma_hat = gains.g_bj * params.p_j_max * (1.0 - params.iota);
    (1.0 + gains.g_bb / (gains.g_bc + sigma_hat + params.sigma2_b)).log2()
}

/// Carol's effective rate given the precomputed interference quantile
/// `sigma_star_val`.
pub fn rate_cc(gains: &LinkGains, params: &SystemParams, sigma_star_val: f64) -> f64 {
    (1.0 + gains.g_cc_sig / (gains.g_cb + sigma_star_val + params.sigma2_c)).log2()
}
