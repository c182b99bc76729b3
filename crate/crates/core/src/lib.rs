//! Cascaded parametric down-conversion triplet sources: quasi-phase-matching design,
//! spectra and rate algebra, Monte Carlo detector time tags, and coincidence analysis.

pub mod bundled;
pub mod cascade;
pub mod coincidence;
pub mod config;
pub mod dispersion;
pub mod error;
pub mod numeric;
pub mod reference;
pub mod report;
pub mod sim;
pub mod spdc;
pub mod units;

pub use error::{Error, ErrorKind, Result};

pub mod constants {
    /// Speed of light, m/s.
    pub const C_M_PER_S: f64 = 299_792_458.0;
    /// Speed of light in nm·THz, so that ν[THz] = C_NM_THZ / λ[nm].
    pub const C_NM_THZ: f64 = 299_792.458;
    /// Planck constant times c, J·m.
    pub const HC_J_M: f64 = 1.986_45e-25;
    /// Vacuum permittivity, F/m.
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
}
