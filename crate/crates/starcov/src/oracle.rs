//! Brute-force validators for the closed forms: Monte Carlo estimators for the
//! detection error probability, outage probabilities and averaged DEP, a
//! grid-search threshold minimizer, a symbol-level estimate of Willie's
//! received power, and central finite differences for gradients.
//!
//! All estimators are deterministic given `(seed, samples)`: the work is
//! partitioned into a fixed number of batches, each driven by its own counter
//! substream, so results are independent of worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::detection::{asymptotic_min_dep, AsymptoticDep, DepParams, Hypothesis};
use crate::model::{Beamformers, ChannelRealization, StarRisProfile, SystemParams};
use crate::qos::LinkGains;
use crate::{Error, Result};

const BATCHES: usize = 64;
const Z95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_half: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Whether `value` lies inside the 95% interval.
    pub fn covers(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.ci_half
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn batch_sizes(samples: usize) -> Vec<usize> {
    let base = samples / BATCHES;
    let rem = samples % BATCHES;
    (0..BATCHES).map(|b| base + usize::from(b < rem)).collect()
}

/// Binomial proportion with a 95% CI: normal approximation, switching to the
/// Wilson interval half-width near the 0/1 edges where the normal width
/// collapses.
fn binom_ci(count: u64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let p = count as f64 / nf;
    let edge = 10.0 / nf;
    let half = if p < edge || p > 1.0 - edge {
        let z2 = Z95 * Z95;
        Z95 / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt()
    } else {
        Z95 * (p * (1.0 - p) / nf).sqrt()
    };
    (p, half)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 10_000 {
        return Err(Error::domain(format!("need at least 10^4 samples, got {samples}")));
    }
    Ok(())
}

/// Monte Carlo DEP of the radiometer at each threshold in `taus`, sharing one
/// sample batch across thresholds. Per sample: the Alice-signal power is the
/// squared magnitude of a complex Gaussian channel draw scaled to the
/// hypothesis mean, the jamming power is uniform on `[0, P_j_max]`.
pub fn mc_dep_curve(p: &DepParams, taus: &[f64], samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_samples(samples)?;
    p.validate()?;
    let sizes = batch_sizes(samples);
    let counts = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut fa = vec![0u64; taus.len()];
            let mut md = vec![0u64; taus.len()];
            for _ in 0..bn {
                let draw_power = |rng: &mut ChaCha8Rng, mean: f64| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    0.5 * mean * (re * re + im * im)
                };
                let s0 = draw_power(&mut rng, p.lambda);
                let pj0: f64 = rng.gen::<f64>() * p.p_j_max;
                let s1 = draw_power(&mut rng, p.lambda_tilde);
                let pj1: f64 = rng.gen::<f64>() * p.p_j_max;
                let pw0 = s0 + p.gamma * pj0 + p.sigma2_w;
                let pw1 = s1 + p.gamma * pj1 + p.sigma2_w;
                for (t, &tau) in taus.iter().enumerate() {
                    if pw0 >= tau {
                        fa[t] += 1;
                    }
                    if pw1 < tau {
                        md[t] += 1;
                    }
                }
            }
            (fa, md)
        })
        .reduce(
            || (vec![0u64; taus.len()], vec![0u64; taus.len()]),
            |(mut fa, mut md), (fb, mb)| {
                for t in 0..fa.len() {
                    fa[t] += fb[t];
                    md[t] += mb[t];
                }
                (fa, md)
            },
        );
    Ok(taus
        .iter()
        .enumerate()
        .map(|(t, _)| {
            let (pfa, ha) = binom_ci(counts.0[t], samples);
            let (pmd, hm) = binom_ci(counts.1[t], samples);
            McEstimate {
                mean: pfa + pmd,
                ci_half: (ha * ha + hm * hm).sqrt(),
                samples,
            }
        })
        .collect())
}

/// Single-threshold convenience wrapper over [`mc_dep_curve`].
pub fn mc_dep(p: &DepParams, tau: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    Ok(mc_dep_curve(p, &[tau], samples, seed)?.remove(0))
}

/// Second, structurally different DEP estimator: only the jamming power is
/// sampled; the signal tail probabilities are integrated analytically per
/// sample via the exponential survival function.
pub fn mc_dep_semianalytic(p: &DepParams, tau: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    p.validate()?;
    let sf = |x: f64, mean: f64| -> f64 {
        if x <= 0.0 {
            1.0
        } else if mean == 0.0 {
            0.0
        } else {
            (-x / mean).exp()
        }
    };
    let sizes = batch_sizes(samples);
    let (sum, sum_sq) = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..bn {
                let pj: f64 = rng.gen::<f64>() * p.p_j_max;
                let t = tau - p.gamma * pj - p.sigma2_w;
                let v = sf(t, p.lambda) + 1.0 - sf(t, p.lambda_tilde);
                acc += v;
                acc2 += v * v;
            }
            (acc, acc2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate { mean, ci_half: Z95 * (var / n).sqrt(), samples })
}

/// Monte Carlo outage at Bob: only the jamming power is random.
pub fn mc_outage_bob(
    gains: &LinkGains,
    r_target: f64,
    params: &SystemParams,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(samples)?;
    let snr_gap = 2f64.powf(r_target) - 1.0;
    let sizes = batch_sizes(samples);
    let count = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut c = 0u64;
            for _ in 0..bn {
                let pj: f64 = rng.gen::<f64>() * params.p_j_max;
                let sinr = gains.g_bb / (gains.g_bc + gains.g_bj * pj + params.sigma2_b);
                if sinr < snr_gap {
                    c += 1;
                }
            }
            c
        })
        .sum::<u64>();
    let (p, half) = binom_ci(count, samples);
    Ok(McEstimate { mean: p, ci_half: half, samples })
}

/// Monte Carlo outage at Carol: jamming power uniform, residual
/// self-interference gain exponential with mean `phi_sic`.
pub fn mc_outage_carol(
    gains: &LinkGains,
    r_target: f64,
    params: &SystemParams,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(samples)?;
    let snr_gap = 2f64.powf(r_target) - 1.0;
    let sizes = batch_sizes(samples);
    let count = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut c = 0u64;
            for _ in 0..bn {
                let pj: f64 = rng.gen::<f64>() * params.p_j_max;
                let sic: f64 = params.phi_sic * rng.sample::<f64, _>(Exp1);
                let sinr = gains.g_cc_sig / (gains.g_cb + sic * pj + params.sigma2_c);
                if sinr < snr_gap {
                    c += 1;
                }
            }
            c
        })
        .sum::<u64>();
    let (p, half) = binom_ci(count, samples);
    Ok(McEstimate { mean: p, ci_half: half, samples })
}

/// Monte Carlo average of the asymptotic minimum DEP over the exponential
/// jamming gain.
pub fn mc_avg_min_dep(a: &AsymptoticDep, samples: usize, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    if !(a.lambda_rw > 0.0) {
        return Err(Error::domain("lambda_rw must be positive"));
    }
    let sizes = batch_sizes(samples);
    let (sum, sum_sq) = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..bn {
                let gamma = a.lambda_rw * rng.sample::<f64, _>(Exp1);
                let v = asymptotic_min_dep(a, gamma);
                acc += v;
                acc2 += v * v;
            }
            (acc, acc2)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate { mean, ci_half: Z95 * (var / n).sqrt(), samples })
}

/// Symbol-level estimate of Willie's average received power: unit-power
/// Gaussian data/jamming symbols and receiver noise, averaged over `symbols`
/// channel uses. Cross terms vanish in the mean, leaving the closed-form
/// hypothesis power.
pub fn mc_willie_symbol_power(
    channels: &ChannelRealization,
    profile: &StarRisProfile,
    bf: &Beamformers,
    p_j: f64,
    sigma2_w: f64,
    hypothesis: Hypothesis,
    symbols: usize,
    seed: u64,
) -> Result<f64> {
    check_samples(symbols)?;
    let theta_r = profile.theta_r_diag();
    let theta_t = profile.theta_t_diag();
    let resp = |w: &[Complex64]| -> Complex64 {
        channels
            .h_rw
            .iter()
            .zip(&theta_r)
            .zip(channels.h_ar_mul(w))
            .map(|((h, t), s)| h.conj() * t * s)
            .sum()
    };
    let u_b = resp(&bf.w_b());
    let u_c = resp(&bf.w_c());
    let u_j: Complex64 = channels
        .h_rw
        .iter()
        .zip(&theta_t)
        .zip(&channels.h_rc)
        .map(|((hw, t), hc)| hw.conj() * t * hc.conj())
        .sum();
    let sizes = batch_sizes(symbols);
    let total: f64 = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &bn)| {
            let mut rng = stream_rng(seed, b as u64);
            let mut sym = |scale: f64| -> Complex64 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (scale / 2.0f64.sqrt())
            };
            let mut acc = 0.0;
            for _ in 0..bn {
                let mut y = u_c * sym(1.0) + u_j * sym(p_j.sqrt()) + sym(sigma2_w.sqrt());
                if hypothesis == Hypothesis::H1 {
                    y += u_b * sym(1.0);
                }
                acc += y.norm_sqr();
            }
            acc
        })
        .sum();
    Ok(total / symbols as f64)
}

/// Exhaustive minimum of `dep` on a log-spaced threshold grid over
/// `[sigma2_w (1 - 1e-3), 10 tau*]`.
pub fn grid_min_threshold(p: &DepParams, grid: usize) -> Result<(f64, f64)> {
    if grid < 10_000 {
        return Err(Error::domain(format!("need at least 10^4 grid points, got {grid}")));
    }
    p.validate()?;
    let tau_star = crate::detection::optimal_threshold(p)
        .ok_or_else(|| Error::domain("degenerate DEP parameters have no threshold"))?;
    let lo = p.sigma2_w * (1.0 - 1e-3);
    let hi = tau_star * 10.0;
    let ratio = (hi / lo).ln();
    let mut best = (lo, crate::detection::dep(lo, p));
    for k in 1..grid {
        let tau = lo * (ratio * k as f64 / (grid - 1) as f64).exp();
        let v = crate::detection::dep(tau, p);
        // Ties break toward the larger threshold: the DEP curve is unimodal
        // but can be flat to machine precision left of the minimizer, and
        // the right edge of such a plateau is the analytic optimum.
        if v <= best.1 {
            best = (tau, v);
        }
    }
    Ok(best)
}

/// Central finite differences of a vector function over the box, step
/// `h_rel * (hi - lo)` per coordinate, falling back to a one-sided stencil at
/// the box edges. Returns one gradient row per output.
pub fn fd_gradient<F>(f: F, x: &[f64], lo: &[f64], hi: &[f64], h_rel: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let base = f(x)?;
    let nf = base.len();
    let mut out = vec![vec![0.0; x.len()]; nf];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..x.len() {
        let h = h_rel * (hi[j] - lo[j]);
        if h == 0.0 {
            continue;
        }
        xp[j] = (x[j] + h).min(hi[j]);
        xm[j] = (x[j] - h).max(lo[j]);
        let fp = f(&xp)?;
        let fm = f(&xm)?;
        let dx = xp[j] - xm[j];
        for i in 0..nf {
            out[i][j] = (fp[i] - fm[i]) / dx;
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    Ok(out)
}
