//! Shared helpers for unit tests.

use crate::model::SystemParams;

/// Default test system mirroring the simulation setup: 3 antennas, 30
/// elements, -20 dB reference gain, exponent 2.6, -100 dBm noise floors.
pub fn test_params() -> SystemParams {
    SystemParams {
        m: 3,
        n: 30,
        rho_0: 0.01,
        alpha: 2.6,
        d_ar: 50.0,
        d_rb: 20.0,
        d_rc: 25.0,
        d_rw: 15.0,
        sigma2_b: 1e-13,
        sigma2_c: 1e-13,
        sigma2_w: 1e-13,
        phi_sic: 1e-11,
        p_max: 2.0,
        p_j_max: 1.0,
        epsilon: 0.1,
        iota: 0.1,
        kappa: 0.1,
        r_star: 4.0,
    }
}

/// Tiny deterministic generator for test parameter draws (splitmix64).
pub struct SplitMix {
    state: u64,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}
