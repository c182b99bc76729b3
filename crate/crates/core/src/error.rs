use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{label}: wavelength {value_nm} nm outside valid range [{min_nm}, {max_nm}] nm")]
    OutOfRange {
        label: String,
        value_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("energy conservation violated: 1/{pump_nm} - 1/{signal_nm} - 1/{idler_nm} has relative error {relative:.3e}")]
    EnergyConservation {
        pump_nm: f64,
        signal_nm: f64,
        idler_nm: f64,
        relative: f64,
    },

    #[error("perfectly phase matched: no poling period needed")]
    PerfectlyPhaseMatched,

    #[error("phase mismatch has the wrong sign for quasi-phase matching (n_p/λ_p - n_s/λ_s - n_i/λ_i = {mismatch:.6e} 1/nm)")]
    WrongSign { mismatch: f64 },

    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("spectrum has no half-maximum crossing inside the grid [{lo_nm}, {hi_nm}] nm (grid spans {width_thz:.3} THz)")]
    UnboundedBandwidth { lo_nm: f64, hi_nm: f64, width_thz: f64 },

    #[error("input timestamps are not sorted at index {index}")]
    Unsorted { index: usize },

    #[error("channel {0} has no tags in the stream")]
    MissingChannel(u8),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("inconsistent measurement: {0}")]
    Inconsistent(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::PerfectlyPhaseMatched
            | Error::WrongSign { .. }
            | Error::Calibration(_)
            | Error::UnboundedBandwidth { .. }
            | Error::ZeroDenominator(_)
            | Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Validation,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::EnergyConservation { .. } => "energy_conservation",
            Error::PerfectlyPhaseMatched => "perfectly_phase_matched",
            Error::WrongSign { .. } => "wrong_sign",
            Error::Invalid { .. } => "invalid",
            Error::Calibration(_) => "calibration",
            Error::UnboundedBandwidth { .. } => "unbounded_bandwidth",
            Error::Unsorted { .. } => "unsorted",
            Error::MissingChannel(_) => "missing_channel",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::Inconsistent(_) => "inconsistent",
            Error::Numeric(_) => "numeric",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
        }
    }
}
