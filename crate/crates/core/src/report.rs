//! End-to-end computations over a [`ProjectConfig`]: design numbers, spectra,
//! acceptance, the rate-model prediction, and simulate-then-analyze closure.

use serde::Serialize;

use crate::cascade::{
    accidental_rate_triplet, car, heralding_probability, predicted_cspdc_efficiency,
    spectral_brightness, triplet_efficiency_from_coincidences, triplet_rate_threefold, twofold_accidentals, Measured,
    RateModelInputs,
};
use crate::coincidence::{AccidentalFloor, AnalysisConfig, CoincidenceHistogram, CoincidenceResult};
use crate::config::{HeraldBandwidth, ProjectConfig, Scenario, StageSetup};
use crate::dispersion::ParasiticMatch;
use crate::error::{Error, Result};
use crate::numeric::grid;
use crate::sim::{detected_singles_rate, expected_coincidence_rate, simulate_with, ChannelRole, ScenarioConfig, SimulationSummary};
use crate::spdc::{
    bandwidth_3db, broadband_pump_factor, effective_filter_bandwidth, integrate_pair_efficiency, photon_probability,
    Acceptance, Bandwidth, Spectrum,
};

/// Wavelength span of the GVD table in the design report.
pub const GVD_TABLE_NM: (f64, f64, f64) = (1100.0, 2600.0, 10.0);

#[derive(Debug, Clone, Serialize)]
pub struct StageDesign {
    pub label: String,
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub period_um: f64,
    pub period_solved: bool,
    pub length_mm: f64,
    pub group_index_pump: f64,
    pub group_index_signal: f64,
    pub gvd_signal_fs2_per_mm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub stages: Vec<StageDesign>,
    /// (nm, fs²/mm) for the signal mode of the last stage.
    pub gvd_curve: Vec<(f64, f64)>,
    pub parasitic: Vec<ParasiticMatch>,
}

pub fn design_report(project: &ProjectConfig) -> Result<DesignReport> {
    let mut stages = Vec::new();
    for s in &project.stages {
        let (p, sig, idl) = s.design_nm;
        let st = &s.stage;
        let named = |e: Error| Error::invalid(format!("stage {}", st.label), e.to_string());
        stages.push(StageDesign {
            label: st.label.clone(),
            pump_nm: p,
            signal_nm: sig,
            idler_nm: idl,
            period_um: st.period_um,
            period_solved: s.period_solved,
            length_mm: st.length_mm,
            group_index_pump: st.pump.group_index(p).map_err(named)?,
            group_index_signal: st.signal.group_index(sig).map_err(named)?,
            gvd_signal_fs2_per_mm: st.signal.gvd(sig).map_err(named)?,
        });
    }
    let gvd_curve = match project.stages.last() {
        Some(s) => {
            let (lo, hi, step) = GVD_TABLE_NM;
            let (a, b) = s.stage.signal.range_nm();
            grid(lo.max(a + 1.0), hi.min(b - 1.0), step)
                .into_iter()
                .map(|l| Ok((l, s.stage.signal.gvd(l)?)))
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let parasitic = match &project.parasitic {
        Some(p) => p.search.run(&p.modes)?,
        None => Vec::new(),
    };
    Ok(DesignReport { stages, gvd_curve, parasitic })
}

#[derive(Debug, Clone)]
pub struct StageSpectrum {
    pub spectrum: Spectrum,
    /// Width of the per-frequency density; `None` when the grid does not bracket both half-maximum points.
    pub bandwidth: Option<Bandwidth>,
    pub pair_efficiency_hz_per_mw: Option<f64>,
}

pub fn stage_spectrum(setup: &StageSetup) -> Result<StageSpectrum> {
    let g = setup.spectrum.ok_or_else(|| {
        Error::invalid(format!("stage {}", setup.stage.label), "no spectrum grid configured")
    })?;
    let spectrum = setup.stage.brightness_spectrum(g.pump_nm, &grid(g.lo_nm, g.hi_nm, g.step_nm))?;
    let bandwidth = match bandwidth_3db(&spectrum.to_per_frequency()) {
        Ok(b) => Some(b),
        Err(Error::UnboundedBandwidth { .. }) => None,
        Err(e) => return Err(e),
    };
    let pair_efficiency_hz_per_mw = setup
        .pair_band_nm
        .map(|(lo, hi)| integrate_pair_efficiency(&spectrum, lo, hi, 2.0 * g.pump_nm))
        .transpose()?;
    Ok(StageSpectrum {
        spectrum,
        bandwidth,
        pair_efficiency_hz_per_mw,
    })
}

pub fn stage_acceptance(setup: &StageSetup) -> Result<Acceptance> {
    let a = setup.acceptance.ok_or_else(|| {
        Error::invalid(format!("stage {}", setup.stage.label), "no acceptance scan configured")
    })?;
    setup
        .stage
        .pump_acceptance_with_step(&a.pump_grid(), a.band_nm, crate::spdc::BAND_STEP_NM)
}

/// Broadband-pump factor of the configured herald filter against the second stage.
pub fn broadband_factor(project: &ProjectConfig) -> Result<f64> {
    let b = project
        .broadband
        .as_ref()
        .ok_or_else(|| Error::invalid("broadband", "no [broadband] block configured"))?;
    let stage = project.stage(&b.stage)?;
    let acc = stage.stage.pump_acceptance(&b.scan.pump_grid(), b.scan.band_nm)?;
    let pump = b.herald_filter.conjugated_lineshape(b.herald_pump_nm)?;
    broadband_pump_factor(&pump, &acc.curve)
}

/// One row of the comparison table, computed for this project.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub interstage: f64,
    pub second_stage: f64,
    pub product: f64,
    pub triplet_rate_hz: f64,
    pub efficiency_hz_per_mw: f64,
}

/// Inputs to the predicted-efficiency product, from one source.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PredictionInputs {
    pub first_stage_brightness: f64,
    pub herald_bandwidth_nm: f64,
    pub second_stage_probability: f64,
    pub broadband_factor: f64,
    pub predicted_efficiency_hz_per_mw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    /// Published inputs used directly, when present.
    pub stated: Option<PredictionInputs>,
    /// Inputs derived from the stage models and filter curve.
    pub model: Option<PredictionInputs>,
    pub herald_efficiency_rescaled: Option<f64>,
    pub granddaughter_efficiency_rescaled: Option<f64>,
    pub herald_efficiency: f64,
    pub granddaughter_efficiency: f64,
    pub triplet_efficiency_hz_per_mw: Measured,
    pub generation_rate_hz: Measured,
    /// The same inversion with the rescaled granddaughter efficiency.
    pub generation_rate_rescaled_hz: Option<Measured>,
    pub herald_brightness: f64,
    pub granddaughter_brightness: f64,
    pub threefold_rate_hz: f64,
    pub threefold_accidentals_hz: f64,
    pub twofold_accidentals_hz: f64,
    pub windowed_accidentals: f64,
    pub coincidence_car: f64,
    /// Measured coincidence rate over herald singles.
    pub heralding_probability_coincidences: f64,
    /// Inferred generation rate over herald singles.
    pub heralding_probability_generation: f64,
    pub granddaughter_rate_per_arm_hz: f64,
    pub background_ratio: f64,
    pub row: MetricsRow,
}

pub fn predict(project: &ProjectConfig) -> Result<Prediction> {
    let m = project
        .measurements
        .as_ref()
        .ok_or_else(|| Error::invalid("predict", "no [measurements] block configured"))?;
    let herald_bw = match m.herald_bandwidth {
        HeraldBandwidth::Fixed(b) => b,
        HeraldBandwidth::FromFilter => effective_filter_bandwidth(
            &project
                .broadband
                .as_ref()
                .ok_or_else(|| Error::invalid("herald bandwidth", "\"filter\" needs a [broadband] herald filter"))?
                .herald_filter,
        ),
    };

    let st = m.stated;
    let stated = match (st.first_stage_brightness, st.second_stage_probability, st.broadband_factor) {
        (Some(b), Some(e2), Some(eta)) => Some(PredictionInputs {
            first_stage_brightness: b,
            herald_bandwidth_nm: herald_bw,
            second_stage_probability: e2,
            broadband_factor: eta,
            predicted_efficiency_hz_per_mw: predicted_cspdc_efficiency(b, herald_bw, e2, eta)?,
        }),
        _ => None,
    };

    let model = match (project.stages.first(), project.stages.get(1)) {
        (Some(first), Some(second)) if project.broadband.is_some() => {
            let (pump, daughter, _) = first.design_nm;
            let b = first.stage.brightness_at(pump, daughter)?;
            let pair = stage_spectrum(second)?.pair_efficiency_hz_per_mw.ok_or_else(|| {
                Error::invalid(format!("stage {}", second.stage.label), "no pair_band configured")
            })?;
            let e2 = photon_probability(pair, second.design_nm.0);
            let eta = broadband_factor(project)?;
            Some(PredictionInputs {
                first_stage_brightness: b,
                herald_bandwidth_nm: herald_bw,
                second_stage_probability: e2,
                broadband_factor: eta,
                predicted_efficiency_hz_per_mw: predicted_cspdc_efficiency(b, herald_bw, e2, eta)?,
            })
        }
        _ => None,
    };

    let rescaled = |role| project.chain(role).ok().map(|c| c.efficiency()).transpose();
    let herald_rescaled = rescaled(ChannelRole::Herald)?;
    let gd_rescaled = rescaled(ChannelRole::Granddaughter)?;
    let eta_h = st
        .herald_efficiency
        .or(herald_rescaled.map(Measured::exact))
        .ok_or_else(|| Error::invalid("predict", "no herald efficiency stated or configured"))?;
    let eta_g = st
        .granddaughter_efficiency
        .or(gd_rescaled.map(Measured::exact))
        .ok_or_else(|| Error::invalid("predict", "no granddaughter efficiency stated or configured"))?;

    let inverted = triplet_efficiency_from_coincidences(m.coincidence_rate, eta_h, eta_g, m.pump_power_mw)?;
    let generation_rate_rescaled_hz = match gd_rescaled {
        Some(g) => Some(
            triplet_efficiency_from_coincidences(m.coincidence_rate, eta_h, Measured::exact(g), m.pump_power_mw)?
                .generation_rate_hz,
        ),
        None => None,
    };

    let e2 = stated
        .map(|s| s.second_stage_probability)
        .or(model.map(|s| s.second_stage_probability))
        .unwrap_or(0.0);
    let generation = inverted.generation_rate_hz.value;
    let pump_photons = m.pump_power_mw.value * crate::spdc::pump_photon_rate_per_mw(m.pump_nm);
    let e1 = if e2 > 0.0 && pump_photons > 0.0 { generation / (pump_photons * e2) } else { 0.0 };
    let inputs = RateModelInputs {
        pump_power_mw: m.pump_power_mw.value,
        pump_nm: m.pump_nm,
        e1: e1.min(1.0),
        e2,
        herald_bandwidth_nm: herald_bw,
        broadband_factor: stated.or(model).map_or(1.0, |s| s.broadband_factor),
        window_ns: m.window_ns,
        herald_singles_hz: m.herald_singles.value,
    };
    inputs.validate()?;
    let acc3 = accidental_rate_triplet(&inputs, eta_g.value);
    let twofold = twofold_accidentals(m.herald_singles.value, m.granddaughter_singles_hz, m.window_ns);
    let per_arm = generation * eta_g.value;

    Ok(Prediction {
        stated,
        model,
        herald_efficiency_rescaled: herald_rescaled,
        granddaughter_efficiency_rescaled: gd_rescaled,
        herald_efficiency: eta_h.value,
        granddaughter_efficiency: eta_g.value,
        triplet_efficiency_hz_per_mw: inverted.efficiency_hz_per_mw,
        generation_rate_hz: inverted.generation_rate_hz,
        generation_rate_rescaled_hz,
        herald_brightness: spectral_brightness(m.herald_singles_slope, eta_h.value, herald_bw, 1.0)?,
        granddaughter_brightness: spectral_brightness(
            m.granddaughter_singles_slope,
            project.chain(ChannelRole::Granddaughter).map_or(eta_g.value, |c| c.calibrated),
            m.granddaughter_bandwidth_nm,
            1.0,
        )?,
        threefold_rate_hz: triplet_rate_threefold(&inputs, eta_h.value, eta_g.value, acc3),
        threefold_accidentals_hz: acc3,
        twofold_accidentals_hz: twofold,
        windowed_accidentals: twofold * m.acquisition_s,
        coincidence_car: car(m.coincidence_rate.value, twofold),
        heralding_probability_coincidences: heralding_probability(m.coincidence_rate.value, m.herald_singles.value)?,
        heralding_probability_generation: heralding_probability(generation, m.herald_singles.value)?,
        granddaughter_rate_per_arm_hz: per_arm,
        background_ratio: if per_arm > 0.0 { m.granddaughter_singles_hz / per_arm } else { f64::INFINITY },
        row: MetricsRow {
            interstage: m.interstage_coupling,
            second_stage: e2,
            product: m.interstage_coupling * e2,
            triplet_rate_hz: generation,
            efficiency_hz_per_mw: inverted.efficiency_hz_per_mw.value,
        },
    })
}

/// Outcome of simulating a scenario and analysing the stream it produced.
#[derive(Debug, Clone, Serialize)]
pub struct Closure {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Expected accidental-subtracted rate, dead-time losses included.
    pub truth_hz: f64,
    pub result: CoincidenceResult,
    pub floor: AccidentalFloor,
    /// R_start·R_stop·bin·T from the expected detected singles rates.
    pub expected_floor_per_bin: f64,
    pub pull: f64,
    pub summary: SimulationSummary,
}

impl Closure {
    pub fn floor_deviation(&self) -> f64 {
        self.floor.mean / self.expected_floor_per_bin - 1.0
    }
}

/// Simulate `config` and histogram it on the fly, never holding the whole stream.
pub fn simulate_and_histogram(
    config: &ScenarioConfig,
    analysis: &AnalysisConfig,
) -> Result<(SimulationSummary, CoincidenceHistogram)> {
    let mut builder = analysis.builder()?;
    let summary = simulate_with(config, |batch| {
        builder.push_batch(batch);
        Ok(())
    })?;
    let hist = builder.finish(config.duration_s)?;
    Ok((summary, hist))
}

pub fn closure(scenario: &Scenario) -> Result<Closure> {
    let (cfg, analysis) = (&scenario.config, &scenario.analysis);
    let (summary, base) = simulate_and_histogram(cfg, analysis)?;
    let a = analysis.analyze(&base)?;
    let truth = expected_coincidence_rate(cfg, analysis.start_channel, analysis.stop_channel)?;
    let r1 = detected_singles_rate(cfg, analysis.start_channel)?;
    let r2 = detected_singles_rate(cfg, analysis.stop_channel)?;
    let expected_floor_per_bin = r1 * r2 * a.hist.bin_width_ps as f64 * 1e-12 * cfg.duration_s;
    let pull = if a.result.sigma_hz > 0.0 { (a.result.rate_hz - truth) / a.result.sigma_hz } else { f64::NAN };
    Ok(Closure {
        scenario: scenario.name.clone(),
        seed: cfg.seed,
        duration_s: cfg.duration_s,
        truth_hz: truth,
        result: a.result,
        floor: a.floor,
        expected_floor_per_bin,
        pull,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_design_report() {
        let r = design_report(&ProjectConfig::bundled()).unwrap();
        assert_eq!(r.stages.len(), 2);
        assert!((r.stages[0].period_um - 2.100217).abs() < 1e-5);
        assert!((r.stages[1].gvd_signal_fs2_per_mm + 7.9932).abs() < 0.01);
        assert!(r.parasitic.iter().any(|m| m.signal_mode == "TE2" && (m.signal_nm - 572.0).abs() < 3.0));
        assert!(!r.gvd_curve.is_empty());
    }

    #[test]
    fn prediction_with_published_inputs() {
        let p = predict(&ProjectConfig::bundled()).unwrap();
        let stated = p.stated.unwrap();
        assert!((stated.predicted_efficiency_hz_per_mw / 5.24e5 - 1.0).abs() < 0.01);
        // 0.20 / (0.138 · 0.033 · 1.88e-4) by hand
        assert_relative_eq!(p.triplet_efficiency_hz_per_mw.value, 0.20 / (0.138 * 0.033 * 1.88e-4), max_relative = 1e-12);
        assert_relative_eq!(p.triplet_efficiency_hz_per_mw.relative(), 0.15, max_relative = 1e-9);
        assert_relative_eq!(p.generation_rate_hz.value, 0.20 / (0.138 * 0.033), max_relative = 1e-12);
        assert_relative_eq!(p.twofold_accidentals_hz, 3e5 * 1.7e4 * 3.584e-9, max_relative = 1e-12);
        assert_relative_eq!(p.heralding_probability_coincidences, 0.20 / 3e5, max_relative = 1e-12);
        assert_eq!(p.row.interstage, 1.0);
        assert!((p.row.second_stage - 4e-5).abs() < 0.5e-5);
    }

    #[test]
    fn model_inputs_track_the_stated_ones() {
        let p = predict(&ProjectConfig::bundled()).unwrap();
        let m = p.model.unwrap();
        assert!((m.first_stage_brightness / 3.5e9 - 1.0).abs() < 0.2);
        assert!((m.second_stage_probability / 4.4e-5 - 1.0).abs() < 0.2);
        assert!((m.broadband_factor - 0.83).abs() < 0.05);
    }

    #[test]
    fn background_ratio_matches_the_spurious_count_level() {
        let p = predict(&ProjectConfig::bundled()).unwrap();
        // 17 kcps of IR singles against ~1.45 cps of granddaughters per arm
        assert!((p.background_ratio / 12000.0 - 1.0).abs() < 0.05, "{}", p.background_ratio);
    }

    #[test]
    fn short_closure_on_scaled_scenario() {
        let project = ProjectConfig::bundled();
        let mut s = project.scenario("scaled").unwrap().clone();
        s.config.duration_s = 60.0;
        s.config.seed = 11;
        let c = closure(&s).unwrap();
        assert!(c.pull.abs() < 4.0, "{c:?}");
        assert!(c.floor_deviation().abs() < 0.2, "{c:?}");
    }
}
