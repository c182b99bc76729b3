//! Data files compiled into the library.

/// Effective-index tables of the reference ridge waveguide.
pub const DISPERSION_TOML: &str = include_str!("../data/dispersion.toml");

/// Digitized transmission of the angle-tuned 836 nm herald bandpass.
pub const HERALD_FILTER_CSV: &str = include_str!("../data/herald_filter.csv");

/// Published values the acceptance suite compares against. Read-only; never used as defaults.
pub const REFERENCE_TOML: &str = include_str!("../data/reference.toml");

/// The reference device and experiment as a project config.
pub const PROJECT_TOML: &str = include_str!("../data/project.toml");

pub fn herald_filter() -> crate::spdc::FilterCurve {
    crate::spdc::FilterCurve::read_csv(HERALD_FILTER_CSV.as_bytes()).expect("bundled filter curve is valid")
}
