//! The joint active/passive beamforming design problem: the objective and
//! constraint functions `f_0..f_3` over the real design vector, their analytic
//! gradients, and the conventional-RIS baseline obtained by pinning the
//! energy-splitting coefficients.
//!
//! `f = [-R_bb, ||w_b||^2 + ||w_c||^2 - P_max, 1 - P_hat_ea - eps, R* - R_cc]`;
//! a design is feasible when `f_1, f_2, f_3 <= 0`. The covertness constraint
//! uses only the smooth lower bound of the averaged minimum DEP, never the
//! piecewise DEP itself.

use std::f64::consts::LN_2;
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detection::{ln1p_over_x, ln1p_over_x_deriv};
use crate::gcmma::{Evaluation, NlpProblem};
use crate::model::{design_bounds, Beamformers, BlockLayout, ChannelRealization, StarRisProfile, SystemParams};
use crate::{Error, Result};

/// Floor/ceiling margin on the energy-splitting coefficients, keeping the
/// square-root amplitudes differentiable and the covertness bound finite on
/// the whole box.
pub const BETA_FLOOR: f64 = 1e-6;

/// One channel realization's optimization problem, immutable once built.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub params: SystemParams,
    pub channels: ChannelRealization,
    /// Carol's interference quantile, constant in the design (watts).
    pub sigma_star_val: f64,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    /// Objective weight on the auxiliary variable `z`.
    pub a_0: f64,
    /// Exact-penalty weights on the constraint slacks `y`.
    pub c: Vec<f64>,
    layout: BlockLayout,
}

impl ProblemInstance {
    pub fn new(params: SystemParams, channels: ChannelRealization) -> Result<Self> {
        params.validate()?;
        if channels.m != params.m || channels.n != params.n {
            return Err(Error::dimension(format!(
                "channel realization is {}x{}, params want {}x{}",
                channels.n, channels.m, params.n, params.m
            )));
        }
        let sigma_star_val = crate::qos::sigma_star(params.kappa, params.phi_sic, params.p_j_max)?;
        let layout = BlockLayout::new(params.m, params.n);
        let (mut x_min, mut x_max) = design_bounds(params.m, params.n, params.p_max);
        for i in layout.beta_r() {
            x_min[i] = BETA_FLOOR;
            x_max[i] = 1.0 - BETA_FLOOR;
        }
        Ok(ProblemInstance {
            params,
            channels,
            sigma_star_val,
            x_min,
            x_max,
            a_0: 1.0,
            c: vec![1e4; 3],
            layout,
        })
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    /// Conventional two-RIS baseline: the first `reflect_ratio * N` elements
    /// are pinned fully reflective, the rest fully transmissive (at the box
    /// margin, so every baseline design also lies in the STAR box). Phases
    /// and precoders stay free.
    pub fn baseline_ris_with_ratio(&self, reflect_ratio: f64) -> Result<ProblemInstance> {
        if !(0.0..=1.0).contains(&reflect_ratio) {
            return Err(Error::config(format!("reflect_ratio must lie in [0, 1], got {reflect_ratio}")));
        }
        let exact = reflect_ratio * self.params.n as f64;
        let n_reflect = exact.round();
        if (exact - n_reflect).abs() > 1e-9 {
            return Err(Error::config(format!(
                "reflect_ratio {reflect_ratio} does not split {} elements into whole groups",
                self.params.n
            )));
        }
        let n_reflect = n_reflect as usize;
        let mut out = self.clone();
        for (k, i) in self.layout.beta_r().enumerate() {
            let pinned = if k < n_reflect { 1.0 - BETA_FLOOR } else { BETA_FLOOR };
            out.x_min[i] = pinned;
            out.x_max[i] = pinned;
        }
        Ok(out)
    }

    /// Even 50/50 baseline split; odd `N` is a configuration error.
    pub fn baseline_ris_instance(&self) -> Result<ProblemInstance> {
        if self.params.n % 2 != 0 {
            return Err(Error::config(format!(
                "the 50/50 RIS baseline needs an even element count, got {}",
                self.params.n
            )));
        }
        self.baseline_ris_with_ratio(0.5)
    }

    /// Uniform draw in the box (pinned coordinates stay pinned).
    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x5ee0);
        self.x_min
            .iter()
            .zip(&self.x_max)
            .map(|(&lo, &hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }

    /// Interpret a raw design slice (no box check).
    pub fn decode(&self, x: &[f64]) -> Result<(Beamformers, StarRisProfile)> {
        let lay = self.layout;
        if x.len() != lay.len() {
            return Err(Error::dimension(format!("design length {} != {}", x.len(), lay.len())));
        }
        let bf = Beamformers::new(
            x[lay.omega_b()].to_vec(),
            x[lay.omega_c()].to_vec(),
            x[lay.phi_b()].to_vec(),
            x[lay.phi_c()].to_vec(),
        )?;
        let profile = StarRisProfile::new(
            x[lay.beta_r()].to_vec(),
            x[lay.phi_r()].to_vec(),
            x[lay.phi_t()].to_vec(),
        )?;
        Ok((bf, profile))
    }

    /// `[f_0, f_1, f_2, f_3]` at `x`.
    pub fn eval_f(&self, x: &[f64]) -> Result<[f64; 4]> {
        let e = self.evaluate(x)?;
        Ok([e.f[0], e.f[1], e.f[2], e.f[3]])
    }

    /// The four gradients at `x`, each of length `4M + 3N`.
    pub fn grad_f(&self, x: &[f64]) -> Result<[Vec<f64>; 4]> {
        let e = self.evaluate(x)?;
        let mut it = e.grad.into_iter();
        Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
    }

    /// Fused values + gradients of all four functions.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let lay = self.layout;
        if x.len() != lay.len() {
            return Err(Error::dimension(format!("design length {} != {}", x.len(), lay.len())));
        }
        let p = &self.params;
        let ch = &self.channels;
        let nv = lay.len();
        let n = p.n;

        let omega_b = &x[lay.omega_b()];
        let omega_c = &x[lay.omega_c()];
        let phi_b = &x[lay.phi_b()];
        let phi_c = &x[lay.phi_c()];
        let beta = &x[lay.beta_r()];
        let phi_r = &x[lay.phi_r()];
        let phi_t = &x[lay.phi_t()];

        let polar = |amps: &[f64], phases: &[f64]| -> Vec<Complex64> {
            amps.iter().zip(phases).map(|(&a, &ph)| Complex64::from_polar(a, ph)).collect()
        };
        let w_b = polar(omega_b, phi_b);
        let w_c = polar(omega_c, phi_c);
        let theta_r: Vec<Complex64> = beta
            .iter()
            .zip(phi_r)
            .map(|(&b, &ph)| Complex64::from_polar(b.max(0.0).sqrt(), ph))
            .collect();
        let theta_t: Vec<Complex64> = beta
            .iter()
            .zip(phi_t)
            .map(|(&b, &ph)| Complex64::from_polar((1.0 - b).max(0.0).sqrt(), ph))
            .collect();
        let hw_b = ch.h_ar_mul(&w_b);
        let hw_c = ch.h_ar_mul(&w_c);

        // Summand vectors term_n = conj(h_n) theta_n s_n for each bilinear form.
        let terms = |h: &[Complex64], theta: &[Complex64], s: &[Complex64]| -> Vec<Complex64> {
            h.iter().zip(theta).zip(s).map(|((hn, tn), sn)| hn.conj() * tn * sn).collect()
        };
        let conj_rc: Vec<Complex64> = ch.h_rc.iter().map(|z| z.conj()).collect();
        let t_bb = terms(&ch.h_rb, &theta_r, &hw_b);
        let t_bc = terms(&ch.h_rb, &theta_r, &hw_c);
        let t_bj = terms(&ch.h_rb, &theta_t, &conj_rc);
        let t_cc = terms(&ch.h_rc, &theta_t, &hw_c);
        let t_cb = terms(&ch.h_rc, &theta_t, &hw_b);

        // Precoder coefficients c_i = sum_n conj(h_n) theta_n H_AR[n, i],
        // shared between the two forms that use the same (h, theta) pair.
        let coeff = |h: &[Complex64], theta: &[Complex64]| -> Vec<Complex64> {
            (0..p.m)
                .map(|i| {
                    (0..n)
                        .map(|r| h[r].conj() * theta[r] * ch.h_ar_at(r, i))
                        .sum()
                })
                .collect()
        };
        let c_b_r = coeff(&ch.h_rb, &theta_r);
        let c_c_t = coeff(&ch.h_rc, &theta_t);

        struct WDep<'a> {
            coeff: &'a [Complex64],
            amp: Range<usize>,
            phase: Range<usize>,
            omega: &'a [f64],
            phi: &'a [f64],
        }

        // |u|^2 and its gradient via 2 Re(conj(u) du).
        let gain_grad = |term: &[Complex64], reflect: bool, w: Option<WDep>| -> (f64, Vec<f64>) {
            let u: Complex64 = term.iter().sum();
            let mut g = vec![0.0; nv];
            let uc = u.conj();
            let (beta_rng, phase_rng) = if reflect {
                (lay.beta_r(), lay.phi_r())
            } else {
                (lay.beta_r(), lay.phi_t())
            };
            for (k, (i_beta, i_phase)) in beta_rng.zip(phase_rng).enumerate() {
                let b = beta[k].clamp(1e-12, 1.0 - 1e-12);
                let dfac = if reflect { 0.5 / b } else { -0.5 / (1.0 - b) };
                g[i_beta] = 2.0 * (uc * term[k] * dfac).re;
                g[i_phase] = 2.0 * (uc * Complex64::i() * term[k]).re;
            }
            if let Some(w) = w {
                for (i, (ai, pi)) in w.amp.zip(w.phase).enumerate() {
                    let e = Complex64::from_polar(1.0, w.phi[i]);
                    g[ai] = 2.0 * (uc * w.coeff[i] * e).re;
                    g[pi] = 2.0 * (uc * Complex64::i() * w.coeff[i] * w.omega[i] * e).re;
                }
            }
            (u.norm_sqr(), g)
        };

        let (g_bb, d_bb) = gain_grad(
            &t_bb,
            true,
            Some(WDep { coeff: &c_b_r, amp: lay.omega_b(), phase: lay.phi_b(), omega: omega_b, phi: phi_b }),
        );
        let (g_bc, d_bc) = gain_grad(
            &t_bc,
            true,
            Some(WDep { coeff: &c_b_r, amp: lay.omega_c(), phase: lay.phi_c(), omega: omega_c, phi: phi_c }),
        );
        let (g_bj, d_bj) = gain_grad(&t_bj, false, None);
        let (g_cc, d_cc) = gain_grad(
            &t_cc,
            false,
            Some(WDep { coeff: &c_c_t, amp: lay.omega_c(), phase: lay.phi_c(), omega: omega_c, phi: phi_c }),
        );
        let (g_cb, d_cb) = gain_grad(
            &t_cb,
            false,
            Some(WDep { coeff: &c_c_t, amp: lay.omega_b(), phase: lay.phi_b(), omega: omega_b, phi: phi_b }),
        );

        // f_0 = -R_bb with R = log2(1 + S/D): dR = (D dS - S dD) / (ln2 D (D + S)).
        let s_j = p.p_j_max * (1.0 - p.iota);
        let d_b = g_bc + s_j * g_bj + p.sigma2_b;
        let f0 = -(1.0 + g_bb / d_b).log2();
        let rate_den = LN_2 * d_b * (d_b + g_bb);
        let mut grad0 = vec![0.0; nv];
        for i in 0..nv {
            let dd = d_bc[i] + s_j * d_bj[i];
            grad0[i] = -(d_b * d_bb[i] - g_bb * dd) / rate_den;
        }

        // f_1: power budget.
        let varpi_b: f64 = omega_b.iter().map(|a| a * a).sum();
        let varpi_c: f64 = omega_c.iter().map(|a| a * a).sum();
        let f1 = varpi_b + varpi_c - p.p_max;
        let mut grad1 = vec![0.0; nv];
        for (i, &a) in lay.omega_b().zip(omega_b.iter()) {
            grad1[i] = 2.0 * a;
        }
        for (i, &a) in lay.omega_c().zip(omega_c.iter()) {
            grad1[i] = 2.0 * a;
        }

        // f_2 = (varpi_b / Omega) ln(1+u)/u - eps with
        // u = P_j_max lambda_rw / lambda_tilde_a.
        let omega_tot = varpi_b + varpi_c;
        let mut grad2 = vec![0.0; nv];
        let f2 = if omega_tot <= 0.0 {
            -p.epsilon
        } else {
            let theta_sum: f64 = beta.iter().sum();
            let lambda_rw: f64 = ch.l_rw
                * ch.h_rc
                    .iter()
                    .zip(beta)
                    .map(|(h, &b)| (1.0 - b) * h.norm_sqr())
                    .sum::<f64>();
            let l_eff = ch.l_ar * ch.l_rw;
            let k_u = p.p_j_max / (l_eff * omega_tot);
            let u = k_u * lambda_rw / theta_sum;
            let l_val = ln1p_over_x(u);
            let l_der = ln1p_over_x_deriv(u);
            let a_frac = varpi_b / omega_tot;
            // Omega-direction: dA/dvarpi_b = varpi_c/Omega^2, du/dvarpi = -u/Omega.
            let coef_b = varpi_c / (omega_tot * omega_tot) * l_val - a_frac * l_der * u / omega_tot;
            let coef_c = -varpi_b / (omega_tot * omega_tot) * l_val - a_frac * l_der * u / omega_tot;
            for (i, &a) in lay.omega_b().zip(omega_b.iter()) {
                grad2[i] = 2.0 * a * coef_b;
            }
            for (i, &a) in lay.omega_c().zip(omega_c.iter()) {
                grad2[i] = 2.0 * a * coef_c;
            }
            for (k, i) in lay.beta_r().enumerate() {
                let dlam = -ch.l_rw * ch.h_rc[k].norm_sqr();
                let du = k_u * (dlam / theta_sum - lambda_rw / (theta_sum * theta_sum));
                grad2[i] = a_frac * l_der * du;
            }
            a_frac * l_val - p.epsilon
        };

        // f_3 = R* - R_cc.
        let d_c = g_cb + self.sigma_star_val + p.sigma2_c;
        let f3 = p.r_star - (1.0 + g_cc / d_c).log2();
        let qos_den = LN_2 * d_c * (d_c + g_cc);
        let mut grad3 = vec![0.0; nv];
        for i in 0..nv {
            grad3[i] = -(d_c * d_cc[i] - g_cc * d_cb[i]) / qos_den;
        }

        Ok(Evaluation {
            f: vec![f0, f1, f2, f3],
            grad: vec![grad0, grad1, grad2, grad3],
        })
    }
}

impl NlpProblem for ProblemInstance {
    fn n_vars(&self) -> usize {
        self.layout.len()
    }

    fn n_cons(&self) -> usize {
        3
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x_min.clone(), self.x_max.clone())
    }

    fn eval(&self, x: &[f64]) -> Result<Evaluation> {
        self.evaluate(x)
    }

    fn a0(&self) -> f64 {
        self.a_0
    }

    fn c_weights(&self) -> Vec<f64> {
        self.c.clone()
    }
}
