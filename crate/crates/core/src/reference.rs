//! Published values of the reference device, kept apart from every default.

use serde::{Deserialize, Serialize};

use crate::cascade::Measured;
use crate::config::{MaybeMeasured, Ratio};
use crate::error::{Error, Result};
use crate::units::{Brightness, Hz, HzPerMw, MilliWatt, Nm, Ps};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    design: RawDesign,
    brightness: RawBrightness,
    filter: RawFilter,
    calibration: Calibration,
    experiment: RawExperiment,
    results: RawResults,
    table_row: Vec<RawRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    first_period: Nm,
    gvd_1592_fs2_per_mm: f64,
    first_stage_fwhm: Nm,
    second_stage_bandwidth: Hz,
    pump_acceptance_fwhm: Nm,
    measured_pump_acceptance_fwhm: Nm,
    parasitic_signal: Nm,
    parasitic_idlers: Vec<Nm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBrightness {
    first_stage_836: Brightness,
    first_stage_796: Brightness,
    second_stage_1550: Brightness,
    second_stage_pair_efficiency: HzPerMw,
    second_stage_probability: Ratio,
    herald_singles_slope: HzPerMw,
    granddaughter_singles_slope: HzPerMw,
    granddaughter_filter_bandwidth: Nm,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    herald_effective_bandwidth: Nm,
    broadband_factor: Ratio,
}

/// Detection-probability calibration numbers, all dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub herald_calibrated: f64,
    pub herald_objective_fraction: f64,
    pub herald_downstream_ratio: f64,
    pub herald_efficiency: f64,
    pub granddaughter_calibrated: f64,
    pub granddaughter_asphere_gain: f64,
    pub granddaughter_beamsplitter: f64,
    pub granddaughter_efficiency: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    pump_power: MilliWatt,
    coincidence_rate: MaybeMeasured<Hz>,
    herald_singles: MaybeMeasured<Hz>,
    granddaughter_singles: Hz,
    expected_granddaughter_rate: Hz,
    background_ratio: f64,
    acquisition: Ps,
    window: Ps,
    window_bins: usize,
    bin_width: Ps,
    windowed_coincidences: u64,
    floor_window: Ps,
    snr: f64,
    heralding_probability: MaybeMeasured<Ratio>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResults {
    predicted_efficiency: HzPerMw,
    efficiency: MaybeMeasured<HzPerMw>,
    generation_rate: MaybeMeasured<Hz>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    reference: String,
    sources: [String; 2],
    interstage: Option<Ratio>,
    second_stage: Option<Ratio>,
    product: Option<Ratio>,
    triplet_rate: Option<Hz>,
    efficiency: Option<HzPerMw>,
    #[serde(default)]
    derived: Vec<String>,
}

/// One row of the comparison table of cascaded experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub reference: String,
    pub sources: [String; 2],
    /// Transfer from the first converter to the second.
    pub interstage: Option<f64>,
    /// Second-stage pairs per pump photon.
    pub second_stage: Option<f64>,
    pub product: Option<f64>,
    pub triplet_rate_hz: Option<f64>,
    pub efficiency_hz_per_mw: Option<f64>,
    /// Fields that were calculated indirectly rather than reported.
    pub derived: Vec<String>,
}

/// Canonical units throughout: nm, Hz, Hz/mW, Hz/(nm·mW), mW, s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub first_period_um: f64,
    pub gvd_1592_fs2_per_mm: f64,
    pub first_stage_fwhm_nm: f64,
    pub second_stage_bandwidth_thz: f64,
    pub pump_acceptance_fwhm_nm: f64,
    pub measured_pump_acceptance_fwhm_nm: f64,
    pub parasitic_signal_nm: f64,
    pub parasitic_idlers_nm: Vec<f64>,

    pub first_stage_brightness_836: f64,
    pub first_stage_brightness_796: f64,
    pub second_stage_brightness_1550: f64,
    pub second_stage_pair_efficiency: f64,
    pub second_stage_probability: f64,
    pub herald_singles_slope: f64,
    pub granddaughter_singles_slope: f64,
    pub granddaughter_filter_bandwidth_nm: f64,

    pub herald_effective_bandwidth_nm: f64,
    pub broadband_factor: f64,

    pub calibration: Calibration,

    pub pump_power_mw: f64,
    pub coincidence_rate: Measured,
    pub herald_singles: Measured,
    pub granddaughter_singles_hz: f64,
    pub expected_granddaughter_rate_hz: f64,
    pub background_ratio: f64,
    pub acquisition_s: f64,
    pub window_ns: f64,
    pub window_bins: usize,
    pub bin_width_ps: f64,
    pub windowed_coincidences: u64,
    pub floor_window_ns: f64,
    pub snr: f64,
    pub heralding_probability: Measured,

    pub predicted_efficiency: f64,
    pub efficiency: Measured,
    pub generation_rate: Measured,

    pub table: Vec<TableRow>,
}

impl Reference {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let r: RawReference = toml::from_str(text).map_err(|e| Error::Parse(format!("reference file: {e}")))?;
        let (d, b, x) = (&r.design, &r.brightness, &r.experiment);
        Ok(Reference {
            first_period_um: d.first_period.0 * 1e-3,
            gvd_1592_fs2_per_mm: d.gvd_1592_fs2_per_mm,
            first_stage_fwhm_nm: d.first_stage_fwhm.0,
            second_stage_bandwidth_thz: d.second_stage_bandwidth.0 * 1e-12,
            pump_acceptance_fwhm_nm: d.pump_acceptance_fwhm.0,
            measured_pump_acceptance_fwhm_nm: d.measured_pump_acceptance_fwhm.0,
            parasitic_signal_nm: d.parasitic_signal.0,
            parasitic_idlers_nm: d.parasitic_idlers.iter().map(|n| n.0).collect(),

            first_stage_brightness_836: b.first_stage_836.0,
            first_stage_brightness_796: b.first_stage_796.0,
            second_stage_brightness_1550: b.second_stage_1550.0,
            second_stage_pair_efficiency: b.second_stage_pair_efficiency.0,
            second_stage_probability: b.second_stage_probability.0,
            herald_singles_slope: b.herald_singles_slope.0,
            granddaughter_singles_slope: b.granddaughter_singles_slope.0,
            granddaughter_filter_bandwidth_nm: b.granddaughter_filter_bandwidth.0,

            herald_effective_bandwidth_nm: r.filter.herald_effective_bandwidth.0,
            broadband_factor: r.filter.broadband_factor.0,

            calibration: r.calibration,

            pump_power_mw: x.pump_power.0,
            coincidence_rate: x.coincidence_rate.resolve(),
            herald_singles: x.herald_singles.resolve(),
            granddaughter_singles_hz: x.granddaughter_singles.0,
            expected_granddaughter_rate_hz: x.expected_granddaughter_rate.0,
            background_ratio: x.background_ratio,
            acquisition_s: x.acquisition.0 * 1e-12,
            window_ns: x.window.0 * 1e-3,
            window_bins: x.window_bins,
            bin_width_ps: x.bin_width.0,
            windowed_coincidences: x.windowed_coincidences,
            floor_window_ns: x.floor_window.0 * 1e-3,
            snr: x.snr,
            heralding_probability: x.heralding_probability.resolve(),

            predicted_efficiency: r.results.predicted_efficiency.0,
            efficiency: r.results.efficiency.resolve(),
            generation_rate: r.results.generation_rate.resolve(),

            table: r
                .table_row
                .into_iter()
                .map(|row| TableRow {
                    reference: row.reference,
                    sources: row.sources,
                    interstage: row.interstage.map(|v| v.0),
                    second_stage: row.second_stage.map(|v| v.0),
                    product: row.product.map(|v| v.0),
                    triplet_rate_hz: row.triplet_rate.map(|v| v.0),
                    efficiency_hz_per_mw: row.efficiency.map(|v| v.0),
                    derived: row.derived,
                })
                .collect(),
        })
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(crate::bundled::REFERENCE_TOML).expect("bundled reference file is valid")
    }

    /// The table row describing this device.
    pub fn this_device(&self) -> &TableRow {
        self.table.last().expect("reference table is not empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loads_with_canonical_units() {
        let r = Reference::bundled();
        assert_relative_eq!(r.first_period_um, 2.1, max_relative = 1e-12);
        assert_relative_eq!(r.second_stage_bandwidth_thz, 116.0, max_relative = 1e-12);
        assert_relative_eq!(r.pump_power_mw, 1.88e-4, max_relative = 1e-12);
        assert_relative_eq!(r.acquisition_s, 57600.0, max_relative = 1e-12);
        assert_relative_eq!(r.window_ns, 3.6, max_relative = 1e-12);
        assert_relative_eq!(r.efficiency.value, 2.37e5, max_relative = 1e-12);
        assert_relative_eq!(r.efficiency.sigma, 3.6e4, max_relative = 1e-12);
        assert_eq!(r.windowed_coincidences, 1_071_811);
    }

    #[test]
    fn table_keeps_both_figures_for_this_device() {
        let r = Reference::bundled();
        assert_eq!(r.table.len(), 8);
        let me = r.this_device();
        assert_eq!(me.reference, "this work");
        // tabulated vs quoted in the text: neither replaces the other
        assert_eq!(me.triplet_rate_hz, Some(24.0));
        assert_relative_eq!(r.generation_rate.value, 45.0);
        assert_eq!(me.efficiency_hz_per_mw, Some(1.3e5));
        let atomic = &r.table[6];
        assert!(atomic.interstage.is_none() && atomic.product.is_none());
    }
}
