//! STAR-RIS assisted covert communication analytics and beamforming optimization.
//!
//! The library has three layers:
//!
//! * closed-form analytics: Willie's detection error probability (DEP), its
//!   optimal-threshold minimum, large-system asymptotics and the smooth lower
//!   bound used as the covertness constraint ([`detection`]); communication
//!   outage probabilities and the effective rates at Bob and Carol ([`qos`]);
//! * the joint active/passive beamforming design problem and a globally
//!   convergent method-of-moving-asymptotes solver ([`problem`], [`gcmma`]);
//! * brute-force validators for every closed form ([`oracle`]) and a seeded
//!   sweep runner behind the `starcov` CLI ([`config`], [`sweep`]).

pub mod config;
pub mod detection;
pub mod error;
pub mod gcmma;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod qos;
pub mod sweep;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
