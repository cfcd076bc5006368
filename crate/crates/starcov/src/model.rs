//! Physical-system types, the channel sampler and the bijection between the
//! solver's real design vector and the beamformers / STAR-RIS matrices.
//!
//! All powers and gains are stored in linear units (watts); dB conversion
//! happens only at the config boundary. Phases live in `[0, 2*pi)` with
//! modular reduction applied at pack time.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// All scalar constants of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Alice antenna count.
    pub m: usize,
    /// STAR-RIS element count.
    pub n: usize,
    /// Reference path gain at 1 m (linear).
    pub rho_0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Distances in meters.
    pub d_ar: f64,
    pub d_rb: f64,
    pub d_rc: f64,
    pub d_rw: f64,
    /// Noise powers in watts.
    pub sigma2_b: f64,
    pub sigma2_c: f64,
    pub sigma2_w: f64,
    /// Residual self-interference coefficient (linear, in `[0, 1]`).
    pub phi_sic: f64,
    /// Alice power budget (watts).
    pub p_max: f64,
    /// Jammer maximum power (watts).
    pub p_j_max: f64,
    /// Covertness slack in `(0, 1)`.
    pub epsilon: f64,
    /// Outage thresholds in `(0, 1)` for Bob and Carol.
    pub iota: f64,
    pub kappa: f64,
    /// Carol QoS rate (bits/s/Hz).
    pub r_star: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::config("antenna and element counts must be >= 1"));
        }
        for (name, v) in [
            ("rho_0", self.rho_0),
            ("d_ar", self.d_ar),
            ("d_rb", self.d_rb),
            ("d_rc", self.d_rc),
            ("d_rw", self.d_rw),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_c", self.sigma2_c),
            ("sigma2_w", self.sigma2_w),
            ("p_max", self.p_max),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(self.p_j_max >= 0.0) {
            return Err(Error::config("p_j_max must be nonnegative"));
        }
        for (name, v) in [("epsilon", self.epsilon), ("iota", self.iota), ("kappa", self.kappa)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.phi_sic) {
            return Err(Error::config("phi_sic must lie in [0, 1]"));
        }
        if !(self.r_star > 0.0) {
            return Err(Error::config("r_star must be positive"));
        }
        Ok(())
    }

    /// Number of real design variables, `4M + 3N`.
    pub fn n_vars(&self) -> usize {
        4 * self.m + 3 * self.n
    }
}

/// Large-scale path gain `rho_0 / d^alpha`.
pub fn path_loss(d: f64, alpha: f64, rho_0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    Ok(rho_0 / d.powf(alpha))
}

/// One draw of all channels, stored with the large-scale gain folded in:
/// every entry equals `sqrt(large-scale gain) * small-scale CN(0,1) draw`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub m: usize,
    pub n: usize,
    /// Alice -> RIS, `N x M` row-major.
    pub h_ar: Vec<Complex64>,
    /// RIS -> Bob / Carol / Willie, length `N`.
    pub h_rb: Vec<Complex64>,
    pub h_rc: Vec<Complex64>,
    pub h_rw: Vec<Complex64>,
    /// Carol self-interference channel (variance `phi_sic`).
    pub h_cc: Complex64,
    /// Large-scale gains (linear).
    pub l_ar: f64,
    pub l_rb: f64,
    pub l_rc: f64,
    pub l_rw: f64,
}

impl ChannelRealization {
    #[inline]
    pub fn h_ar_at(&self, row: usize, col: usize) -> Complex64 {
        self.h_ar[row * self.m + col]
    }

    /// `(H_AR w)_n` for every RIS element.
    pub fn h_ar_mul(&self, w: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(w.len(), self.m);
        (0..self.n)
            .map(|r| {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..self.m {
                    acc += self.h_ar_at(r, c) * w[c];
                }
                acc
            })
            .collect()
    }
}

fn complex_gaussian(rng: &mut impl Rng, scale: f64) -> Complex64 {
    let re: f64 = rng.sample(rand_distr::StandardNormal);
    let im: f64 = rng.sample(rand_distr::StandardNormal);
    Complex64::new(re, im) * (scale / 2.0f64.sqrt())
}

// Substream ids, one per channel block, so blocks are independently
// reproducible regardless of draw order.
const STREAM_H_AR: u64 = 0;
const STREAM_H_RB: u64 = 1;
const STREAM_H_RC: u64 = 2;
const STREAM_H_RW: u64 = 3;
const STREAM_H_CC: u64 = 4;

/// Deterministic i.i.d. Rayleigh draw of all channels for `params`.
pub fn sample_channels(params: &SystemParams, seed: u64) -> Result<ChannelRealization> {
    params.validate()?;
    let l_ar = path_loss(params.d_ar, params.alpha, params.rho_0)?;
    let l_rb = path_loss(params.d_rb, params.alpha, params.rho_0)?;
    let l_rc = path_loss(params.d_rc, params.alpha, params.rho_0)?;
    let l_rw = path_loss(params.d_rw, params.alpha, params.rho_0)?;

    let stream = |id: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        rng
    };

    let mut rng = stream(STREAM_H_AR);
    let h_ar = (0..params.n * params.m)
        .map(|_| complex_gaussian(&mut rng, l_ar.sqrt()))
        .collect();
    let mut rng = stream(STREAM_H_RB);
    let h_rb = (0..params.n).map(|_| complex_gaussian(&mut rng, l_rb.sqrt())).collect();
    let mut rng = stream(STREAM_H_RC);
    let h_rc = (0..params.n).map(|_| complex_gaussian(&mut rng, l_rc.sqrt())).collect();
    let mut rng = stream(STREAM_H_RW);
    let h_rw = (0..params.n).map(|_| complex_gaussian(&mut rng, l_rw.sqrt())).collect();
    let mut rng = stream(STREAM_H_CC);
    let h_cc = complex_gaussian(&mut rng, params.phi_sic.sqrt());

    Ok(ChannelRealization {
        m: params.m,
        n: params.n,
        h_ar,
        h_rb,
        h_rc,
        h_rw,
        h_cc,
        l_ar,
        l_rb,
        l_rc,
        l_rw,
    })
}

/// Per-element reflection power fractions and phases of the STAR-RIS.
/// The transmission fraction is `1 - beta_r` element-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct StarRisProfile {
    pub beta_r: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub phi_t: Vec<f64>,
}

impl StarRisProfile {
    pub fn new(beta_r: Vec<f64>, phi_r: Vec<f64>, phi_t: Vec<f64>) -> Result<Self> {
        if beta_r.len() != phi_r.len() || beta_r.len() != phi_t.len() {
            return Err(Error::dimension("STAR-RIS profile vectors must share a length"));
        }
        if beta_r.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
            return Err(Error::bounds("beta_r entries must lie in [0, 1]"));
        }
        Ok(StarRisProfile { beta_r, phi_r, phi_t })
    }

    pub fn len(&self) -> usize {
        self.beta_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_r.is_empty()
    }

    /// `diag(Theta_r) = sqrt(beta_r) . e^{j phi_r}`.
    pub fn theta_r_diag(&self) -> Vec<Complex64> {
        self.beta_r
            .iter()
            .zip(&self.phi_r)
            .map(|(&b, &p)| Complex64::from_polar(b.sqrt(), p))
            .collect()
    }

    /// `diag(Theta_t) = sqrt(1 - beta_r) . e^{j phi_t}`.
    pub fn theta_t_diag(&self) -> Vec<Complex64> {
        self.beta_r
            .iter()
            .zip(&self.phi_t)
            .map(|(&b, &p)| Complex64::from_polar((1.0 - b).sqrt(), p))
            .collect()
    }

    /// `sum_n beta_r^n`, i.e. `diag(Theta_r)^H diag(Theta_r)`.
    pub fn theta_r_power(&self) -> f64 {
        self.beta_r.iter().sum()
    }
}

/// Alice's precoders in amplitude/phase parameterization,
/// `w_xi = omega_xi . e^{j phi_xi}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub omega_b: Vec<f64>,
    pub omega_c: Vec<f64>,
    pub phi_b: Vec<f64>,
    pub phi_c: Vec<f64>,
}

impl Beamformers {
    pub fn new(omega_b: Vec<f64>, omega_c: Vec<f64>, phi_b: Vec<f64>, phi_c: Vec<f64>) -> Result<Self> {
        let m = omega_b.len();
        if omega_c.len() != m || phi_b.len() != m || phi_c.len() != m {
            return Err(Error::dimension("beamformer vectors must share a length"));
        }
        if omega_b.iter().chain(&omega_c).any(|&a| a < 0.0) {
            return Err(Error::bounds("beamformer amplitudes must be nonnegative"));
        }
        Ok(Beamformers { omega_b, omega_c, phi_b, phi_c })
    }

    pub fn m(&self) -> usize {
        self.omega_b.len()
    }

    pub fn w_b(&self) -> Vec<Complex64> {
        self.omega_b
            .iter()
            .zip(&self.phi_b)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    pub fn w_c(&self) -> Vec<Complex64> {
        self.omega_c
            .iter()
            .zip(&self.phi_c)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    /// `||w_b||^2`.
    pub fn varpi_b(&self) -> f64 {
        self.omega_b.iter().map(|a| a * a).sum()
    }

    /// `||w_c||^2`.
    pub fn varpi_c(&self) -> f64 {
        self.omega_c.iter().map(|a| a * a).sum()
    }
}

/// Real parameterization of the whole design:
/// `x = [omega_b, omega_c, phi_b, phi_c, beta_r, phi_r, phi_t]`, length `4M + 3N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    pub m: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

/// Index ranges of the seven blocks inside a design vector.
#[derive(Debug, Clone, Copy)]
pub struct BlockLayout {
    pub m: usize,
    pub n: usize,
}

impl BlockLayout {
    pub fn new(m: usize, n: usize) -> Self {
        BlockLayout { m, n }
    }

    pub fn len(&self) -> usize {
        4 * self.m + 3 * self.n
    }

    pub fn omega_b(&self) -> std::ops::Range<usize> {
        0..self.m
    }
    pub fn omega_c(&self) -> std::ops::Range<usize> {
        self.m..2 * self.m
    }
    pub fn phi_b(&self) -> std::ops::Range<usize> {
        2 * self.m..3 * self.m
    }
    pub fn phi_c(&self) -> std::ops::Range<usize> {
        3 * self.m..4 * self.m
    }
    pub fn beta_r(&self) -> std::ops::Range<usize> {
        4 * self.m..4 * self.m + self.n
    }
    pub fn phi_r(&self) -> std::ops::Range<usize> {
        4 * self.m + self.n..4 * self.m + 2 * self.n
    }
    pub fn phi_t(&self) -> std::ops::Range<usize> {
        4 * self.m + 2 * self.n..4 * self.m + 3 * self.n
    }
}

/// Default box for a design vector: amplitudes in `[0, sqrt(P_max)]`,
/// reflection fractions in `[0, 1]`, phases in `[0, 2*pi]`.
pub fn design_bounds(m: usize, n: usize, p_max: f64) -> (Vec<f64>, Vec<f64>) {
    let layout = BlockLayout::new(m, n);
    let mut lo = vec![0.0; layout.len()];
    let mut hi = vec![0.0; layout.len()];
    let amp = p_max.sqrt();
    for i in layout.omega_b().chain(layout.omega_c()) {
        hi[i] = amp;
    }
    for i in layout.phi_b().chain(layout.phi_c()).chain(layout.phi_r()).chain(layout.phi_t()) {
        hi[i] = TAU;
    }
    for i in layout.beta_r() {
        hi[i] = 1.0;
    }
    let _ = &mut lo;
    (lo, hi)
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Flatten beamformers and RIS profile into a design vector.
/// Phases are reduced into `[0, 2*pi)` here.
pub fn pack(bf: &Beamformers, profile: &StarRisProfile, p_max: f64) -> Result<DesignVector> {
    let m = bf.m();
    let n = profile.len();
    let layout = BlockLayout::new(m, n);
    let (x_min, x_max) = design_bounds(m, n, p_max);
    let mut x = vec![0.0; layout.len()];
    x[layout.omega_b()].copy_from_slice(&bf.omega_b);
    x[layout.omega_c()].copy_from_slice(&bf.omega_c);
    for (dst, src) in [
        (layout.phi_b(), &bf.phi_b),
        (layout.phi_c(), &bf.phi_c),
        (layout.phi_r(), &profile.phi_r),
        (layout.phi_t(), &profile.phi_t),
    ] {
        for (i, &p) in dst.zip(src.iter()) {
            x[i] = wrap_phase(p);
        }
    }
    x[layout.beta_r()].copy_from_slice(&profile.beta_r);
    for (i, (&v, (&lo, &hi))) in x.iter().zip(x_min.iter().zip(&x_max)).enumerate() {
        if v < lo || v > hi {
            return Err(Error::bounds(format!("design entry {i} = {v} outside [{lo}, {hi}]")));
        }
    }
    Ok(DesignVector { m, n, x, x_min, x_max })
}

/// Inverse of [`pack`]. Entries outside the box are an error, never clamped.
pub fn unpack(dv: &DesignVector) -> Result<(Beamformers, StarRisProfile)> {
    let layout = BlockLayout::new(dv.m, dv.n);
    if dv.x.len() != layout.len() {
        return Err(Error::dimension(format!(
            "design vector length {} does not match 4M+3N = {}",
            dv.x.len(),
            layout.len()
        )));
    }
    for (i, (&v, (&lo, &hi))) in dv.x.iter().zip(dv.x_min.iter().zip(&dv.x_max)).enumerate() {
        if v < lo || v > hi {
            return Err(Error::bounds(format!("design entry {i} = {v} outside [{lo}, {hi}]")));
        }
    }
    let bf = Beamformers::new(
        dv.x[layout.omega_b()].to_vec(),
        dv.x[layout.omega_c()].to_vec(),
        dv.x[layout.phi_b()].to_vec(),
        dv.x[layout.phi_c()].to_vec(),
    )?;
    let profile = StarRisProfile::new(
        dv.x[layout.beta_r()].to_vec(),
        dv.x[layout.phi_r()].to_vec(),
        dv.x[layout.phi_t()].to_vec(),
    )?;
    Ok((bf, profile))
}
