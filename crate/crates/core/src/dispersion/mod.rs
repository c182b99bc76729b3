//! Refractive, group and group-velocity-dispersion indices of waveguide modes,
//! quasi-phase-matching periods and the search for parasitic phase-matched processes.

mod library;
mod qpm;
mod sellmeier;
mod table;

pub use library::{DispersionLibrary, WaveguideGeometry};
pub use qpm::{energy_mismatch, mismatch_per_nm, qpm_period, ModeSet, ParasiticMatch, ParasiticSearch};
pub use sellmeier::{SellmeierForm, SellmeierModel};
pub use table::TabulatedIndex;

use crate::constants::C_M_PER_S;
use crate::error::{Error, Result};

/// Default central-difference step for dn/dλ.
pub const FIRST_DERIVATIVE_STEP_NM: f64 = 0.1;
/// Default central-difference step for d²n/dλ².
pub const SECOND_DERIVATIVE_STEP_NM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    QuasiTe,
    QuasiTm,
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "quasi-te" | "te" => Ok(Polarization::QuasiTe),
            "quasi-tm" | "tm" => Ok(Polarization::QuasiTm),
            _ => Err(Error::invalid("polarization", format!("{s:?} is neither quasi-TE nor quasi-TM"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum IndexSource {
    Sellmeier(SellmeierModel),
    Table(TabulatedIndex),
}

/// Index model of one guided mode (or a bulk material treated as one).
#[derive(Debug, Clone)]
pub struct ModeDispersion {
    pub label: String,
    pub polarization: Polarization,
    source: IndexSource,
}

impl ModeDispersion {
    pub fn new(label: impl Into<String>, polarization: Polarization, source: IndexSource) -> Self {
        ModeDispersion {
            label: label.into(),
            polarization,
            source,
        }
    }

    pub fn tabulated(label: impl Into<String>, knots: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Ok(Self::new(label, Polarization::QuasiTe, IndexSource::Table(TabulatedIndex::new(knots)?)))
    }

    pub fn bulk(model: SellmeierModel) -> Self {
        Self::new(model.label.clone(), Polarization::QuasiTe, IndexSource::Sellmeier(model))
    }

    pub fn source(&self) -> &IndexSource {
        &self.source
    }

    pub fn range_nm(&self) -> (f64, f64) {
        match &self.source {
            IndexSource::Sellmeier(s) => s.range_nm,
            IndexSource::Table(t) => t.range_nm(),
        }
    }

    fn check(&self, lambda_nm: f64) -> Result<()> {
        let (lo, hi) = self.range_nm();
        if lambda_nm >= lo && lambda_nm <= hi {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                label: self.label.clone(),
                value_nm: lambda_nm,
                min_nm: lo,
                max_nm: hi,
            })
        }
    }

    pub fn refractive_index(&self, lambda_nm: f64) -> Result<f64> {
        self.check(lambda_nm)?;
        match &self.source {
            IndexSource::Sellmeier(s) => s.refractive_index(lambda_nm),
            IndexSource::Table(t) => Ok(t.eval(lambda_nm)),
        }
    }

    pub fn group_index(&self, lambda_nm: f64) -> Result<f64> {
        self.group_index_with_step(lambda_nm, FIRST_DERIVATIVE_STEP_NM)
    }

    /// n_g = n − λ dn/dλ with a central difference of half-width `step_nm`.
    pub fn group_index_with_step(&self, lambda_nm: f64, step_nm: f64) -> Result<f64> {
        let lo = self.refractive_index(lambda_nm - step_nm)?;
        let hi = self.refractive_index(lambda_nm + step_nm)?;
        let n = self.refractive_index(lambda_nm)?;
        Ok(n - lambda_nm * (hi - lo) / (2.0 * step_nm))
    }

    /// d²n/dλ² in 1/nm².
    pub fn curvature_with_step(&self, lambda_nm: f64, step_nm: f64) -> Result<f64> {
        let lo = self.refractive_index(lambda_nm - step_nm)?;
        let hi = self.refractive_index(lambda_nm + step_nm)?;
        let n = self.refractive_index(lambda_nm)?;
        Ok((hi - 2.0 * n + lo) / (step_nm * step_nm))
    }

    /// β₂ in fs²/mm; negative means anomalous dispersion.
    pub fn gvd(&self, lambda_nm: f64) -> Result<f64> {
        self.gvd_with_step(lambda_nm, SECOND_DERIVATIVE_STEP_NM)
    }

    pub fn gvd_with_step(&self, lambda_nm: f64, step_nm: f64) -> Result<f64> {
        let d2n = self.curvature_with_step(lambda_nm, step_nm)? * 1e18; // 1/m²
        Ok(gvd_from_curvature(lambda_nm, d2n))
    }
}

/// β₂ = λ³/(2πc²) · d²n/dλ², with λ in nm, curvature in 1/m², result in fs²/mm.
pub fn gvd_from_curvature(lambda_nm: f64, d2n_per_m2: f64) -> f64 {
    let lam = lambda_nm * 1e-9;
    let si = lam.powi(3) / (2.0 * std::f64::consts::PI * C_M_PER_S * C_M_PER_S) * d2n_per_m2;
    si * 1e27
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table(f: impl Fn(f64) -> f64) -> ModeDispersion {
        ModeDispersion::tabulated("synthetic", (0..=600).map(|k| {
            let l = 400.0 + 2.0 * k as f64;
            (l, f(l))
        }))
        .unwrap()
    }

    #[test]
    fn constant_table() {
        let m = table(|_| 2.0);
        assert_eq!(m.refractive_index(1000.0).unwrap(), 2.0);
        assert_relative_eq!(m.group_index(1000.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.gvd(1000.0).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn query_at_knot() {
        let m = ModeDispersion::tabulated("k", [(700.0, 1.9), (750.0, 1.87), (796.0, 1.85), (850.0, 1.83), (900.0, 1.82)])
            .unwrap();
        assert_relative_eq!(m.refractive_index(796.0).unwrap(), 1.85, epsilon = 1e-12);
    }

    #[test]
    fn linear_index_group_index() {
        let a = -1.2e-4;
        let m = table(|l| 2.0 + a * (l - 900.0));
        let l = 1100.0;
        let n = 2.0 + a * (l - 900.0);
        assert_relative_eq!(m.group_index(l).unwrap(), n - l * a, epsilon = 1e-10);
    }

    #[test]
    fn quadratic_index_gvd() {
        let b = 3.0e-7;
        let m = table(|l| 2.0 + b * (l - 900.0).powi(2));
        let lam = 1300.0;
        let expected = gvd_from_curvature(lam, 2.0 * b * 1e18);
        assert_relative_eq!(m.gvd(lam).unwrap(), expected, max_relative = 1e-4);
        // about 2e3 fs²/mm for this curvature: sign and magnitude sanity
        assert!(expected > 1000.0 && expected < 3000.0);
    }

    #[test]
    fn out_of_range_names_value() {
        let m = table(|_| 2.0);
        match m.refractive_index(1601.0) {
            Err(Error::OutOfRange { value_nm, .. }) => assert_eq!(value_nm, 1601.0),
            other => panic!("{other:?}"),
        }
        assert!(m.group_index(400.05).is_err());
        assert!(m.gvd(1599.8).is_err());
    }

    proptest! {
        #[test]
        fn constant_model_has_trivial_derivatives(n in 1.1f64..3.5, lam in 402.0f64..1598.0) {
            let m = table(|_| n);
            prop_assert!((m.group_index(lam).unwrap() - n).abs() < 1e-9);
            // floating-point noise of the second difference only
            prop_assert!(m.gvd(lam).unwrap().abs() < 1e-3);
        }

        #[test]
        fn spline_passes_through_knots(k in 0usize..=600) {
            let f = |l: f64| 2.2 - 1e-4 * l + 3e-8 * l * l;
            let m = table(f);
            let l = 400.0 + 2.0 * k as f64;
            prop_assert!((m.refractive_index(l).unwrap() - f(l)).abs() < 1e-12);
        }
    }
}
